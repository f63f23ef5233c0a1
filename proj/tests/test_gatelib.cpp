#include <algorithm>
#include <catch_amalgamated.hpp>

#include "urgate/gatelib.hpp"

using namespace urgate;

TEST_CASE("variant names round-trip") {
  for (const char* n : GateConfig::kVariantNames) {
    CHECK(GateConfig::from_name(n).name() == n);
  }
  CHECK_THROWS_WITH(GateConfig::from_name("XX"),
                    Catch::Matchers::ContainsSubstring("--") &&
                        Catch::Matchers::ContainsSubstring("UR") &&
                        Catch::Matchers::ContainsSubstring("OM"));
  GateConfig bad;
  bad.init_kind = InitKind::ChronoInit;
  bad.aux_kind = AuxKind::Refine;  // CR is not a supported variant
  CHECK_THROWS_AS(bad.name(), std::logic_error);
  GateConfig m = GateConfig::from_name("OM");
  m.downsize_c = 3;
  CHECK_THROWS_AS(m.validate(8), std::invalid_argument);
}

TEST_CASE("init_standard") {
  BiasInit b = init_standard(4, 1.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(b.forget_bias[i] == 1.0);
    CHECK(b.input_bias[i] == 0.0);
  }
  CHECK(sigmoid(init_standard(1, 0.0).forget_bias[0]) == 0.5);
  // decay period of sigma(1.0) is about 3.7 steps
  CHECK(1.0 / (1.0 - sigmoid(1.0)) == Catch::Approx(3.7).margin(0.05));
}

TEST_CASE("init_uniform") {
  Rng rng(11);
  BiasInit degenerate = init_uniform(2, rng, 0.5 - 1e-12);
  CHECK(std::abs(degenerate.forget_bias[0]) < 1e-9);
  CHECK_THROWS_AS(init_uniform(1, rng, 0.25), std::invalid_argument);

  BiasInit b4 = init_uniform(4, rng, 0.25);
  const double ln3 = std::log(3.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(b4.forget_bias[i] >= -ln3 - 1e-12);
    CHECK(b4.forget_bias[i] <= ln3 + 1e-12);
    CHECK(b4.input_bias[i] == -b4.forget_bias[i]);
  }
}

TEST_CASE("uniform init timescale survival function") {
  // Decay periods D = 1/(1-f) follow P(D > x) = 1/x when f ~ U(0,1).
  const int n = 100000;
  const int d = 128;
  Rng rng(12);
  std::vector<double> ds;
  ds.reserve(n);
  while (static_cast<int>(ds.size()) < n) {
    BiasInit b = init_uniform(d, rng, 1.0 / d);
    for (int i = 0; i < d && static_cast<int>(ds.size()) < n; ++i) {
      ds.push_back(1.0 / (1.0 - sigmoid(b.forget_bias[i])));
    }
  }
  for (double x : {2.0, 5.0, 10.0}) {
    const double frac =
        static_cast<double>(std::count_if(ds.begin(), ds.end(),
                                          [&](double v) { return v > x; })) / n;
    CHECK(frac == Catch::Approx(1.0 / x).margin(0.01));
  }
}

TEST_CASE("uniform init KS against the sampling interval") {
  const int d = 128;
  const int n = 100000;
  Rng rng(13);
  std::vector<double> acts;
  acts.reserve(n);
  while (static_cast<int>(acts.size()) < n) {
    BiasInit b = init_uniform(d, rng, 1.0 / d);
    for (int i = 0; i < d && static_cast<int>(acts.size()) < n; ++i) {
      acts.push_back(sigmoid(b.forget_bias[i]));
    }
  }
  std::sort(acts.begin(), acts.end());
  const double lo = 1.0 / d, hi = 1.0 - 1.0 / d;
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = std::clamp((acts[i] - lo) / (hi - lo), 0.0, 1.0);
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i + 1) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("init_chrono") {
  Rng rng(14);
  BiasInit b2 = init_chrono(8, 2, rng);
  for (int i = 0; i < 8; ++i) CHECK(b2.forget_bias[i] == 0.0);
  CHECK_THROWS_AS(init_chrono(8, 1, rng), std::invalid_argument);

  const int t_max = 100;
  BiasInit b = init_chrono(1000, t_max, rng);
  for (int i = 0; i < 1000; ++i) {
    CHECK(b.forget_bias[i] >= 0.0);
    const double D = 1.0 + std::exp(b.forget_bias[i]);
    CHECK(D >= 2.0 - 1e-12);
    CHECK(D <= t_max + 1e-9);
    CHECK(b.input_bias[i] == -b.forget_bias[i]);
  }

  // default t_max equals the hidden size
  GateConfig c = GateConfig::from_name("C-");
  CHECK(c.effective_t_max(64) == 64);
  c.t_max = 200;
  CHECK(c.effective_t_max(64) == 200);
}

TEST_CASE("adjustment function") {
  CHECK(adjustment(0.0) == 0.0);
  CHECK(adjustment(1.0) == 0.0);
  CHECK(adjustment(0.5) == 0.25);
  CHECK(adjustment(0.3) == Catch::Approx(adjustment(0.7)).epsilon(1e-14));
  CHECK(adjustment(0.9) == Catch::Approx(0.09).epsilon(1e-12));
  // band around f = 0.9 is [0.81, 0.99]
  CHECK(0.9 - adjustment(0.9) == Catch::Approx(0.81).epsilon(1e-12));
  CHECK(0.9 + adjustment(0.9) == Catch::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("refine_compose values and algebra") {
  CHECK(refine_compose(0.9, 1.0) == Catch::Approx(0.99).epsilon(1e-12));
  CHECK(refine_compose(0.7, 0.5) == Catch::Approx(0.7).margin(1e-14));
  CHECK(refine_compose(0.5, 0.75) == Catch::Approx(0.625).epsilon(1e-14));
  CHECK(refine_compose(0.0, 0.3) == 0.0);
  CHECK(refine_compose(1.0, 0.3) == 1.0);

  Rng rng(15);
  for (int k = 0; k < 100000; ++k) {
    const double f = rng.next_double();
    const double r = rng.next_double();
    const double g = refine_compose(f, r);
    const double lo = f * f;
    const double hi = 1.0 - (1.0 - f) * (1.0 - f);
    CHECK(g >= lo - 1e-14);
    CHECK(g <= hi + 1e-14);
    CHECK(g >= -1e-14);
    CHECK(g <= 1.0 + 1e-14);
    // alternative algebraic form
    const double alt = 2.0 * r * f + (1.0 - 2.0 * r) * f * f;
    CHECK(std::abs(g - alt) < 1e-14);
    // midpoint identity
    CHECK(std::abs(refine_compose(f, 0.5) - f) < 1e-14);
  }

  Vector f(2), r(3);
  CHECK_THROWS_WITH(refine_compose(f, r),
                    Catch::Matchers::ContainsSubstring("length mismatch"));
}

TEST_CASE("master_compose boundaries") {
  Vector f(3), i(3), ones = Vector::Ones(3), zeros = Vector::Zero(3);
  f << 0.2, 0.5, 0.8;
  i << 0.9, 0.4, 0.1;
  auto [fh1, ih1] = master_compose(f, i, ones, ones);
  CHECK((fh1 - f).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ih1 - i).cwiseAbs().maxCoeff() < 1e-15);

  // omega = 0: the master gates dominate
  Vector mf(3);
  mf << 0.3, 0.6, 0.9;
  auto [fh0, ih0] = master_compose(f, i, mf, zeros);
  CHECK((fh0 - mf).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(ih0.cwiseAbs().maxCoeff() < 1e-15);

  Rng rng(16);
  for (int k = 0; k < 1000; ++k) {
    Vector a = rng.uniform_vector(4, 0.0, 1.0);
    Vector b = rng.uniform_vector(4, 0.0, 1.0);
    Vector c = rng.uniform_vector(4, 0.0, 1.0);
    Vector d = rng.uniform_vector(4, 0.0, 1.0);
    auto [fh, ih] = master_compose(a, b, c, d);
    CHECK(fh.minCoeff() >= -1e-14);
    CHECK(fh.maxCoeff() <= 1.0 + 1e-14);
    CHECK(ih.minCoeff() >= -1e-14);
    CHECK(ih.maxCoeff() <= 1.0 + 1e-14);
  }
  CHECK_THROWS_AS(master_compose(f, i, Vector::Ones(2), ones),
                  std::invalid_argument);
}

TEST_CASE("tied_master_rescaled equals refine with swapped roles") {
  Vector f(1), mf(1);
  f << 1.0;
  mf << 0.9;
  auto [fh, ih] = tied_master_rescaled(f, mf);
  CHECK(fh[0] == Catch::Approx(0.99).epsilon(1e-12));

  f << 0.5;
  mf << 0.37;
  auto [fh2, ih2] = tied_master_rescaled(f, mf);
  CHECK(fh2[0] == Catch::Approx(0.37).margin(1e-14));

  Rng rng(17);
  for (int k = 0; k < 10000; ++k) {
    Vector a = rng.uniform_vector(4, 0.0, 1.0);   // fine forget gate
    Vector m = rng.uniform_vector(4, 0.0, 1.0);   // master
    auto [F, I] = tied_master_rescaled(a, m);
    Vector R = refine_compose(m, a);  // master is the main gate, f refines it
    CHECK((F - R).cwiseAbs().maxCoeff() < 1e-14);
    // closed-form identity
    for (int j = 0; j < 4; ++j) {
      const double want = a[j] * (1.0 - (1.0 - m[j]) * (1.0 - m[j])) +
                          (1.0 - a[j]) * m[j] * m[j];
      CHECK(std::abs(F[j] - want) < 1e-14);
    }
  }
  CHECK_THROWS_AS(tied_master_rescaled(Vector::Ones(2), Vector::Ones(3)),
                  std::invalid_argument);
}

TEST_CASE("master_downsize_expand") {
  Vector m(2);
  m << 0.3, 0.8;
  CHECK((master_downsize_expand(m, 1) - m).norm() == 0.0);
  Vector e = master_downsize_expand(m, 2);
  REQUIRE(e.size() == 4);
  CHECK(e[0] == 0.3);
  CHECK(e[1] == 0.3);
  CHECK(e[2] == 0.8);
  CHECK(e[3] == 0.8);
}

TEST_CASE("effective_gates dispatch") {
  const Vector zero4 = Vector::Zero(4);
  const Vector empty;

  SECTION("UR with zero pre-activations and zero bias") {
    GateConfig cfg = GateConfig::from_name("UR");
    BiasInit b;
    b.forget_bias = Vector::Zero(4);
    b.input_bias = Vector::Zero(4);
    GatePack p = effective_gates(cfg, zero4, zero4, empty, empty, b);
    CHECK(p.f[0] == 0.5);
    CHECK(p.r[0] == 0.5);
    CHECK(p.g[0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(p.effective_input[0] == Catch::Approx(0.5).margin(1e-15));
  }

  SECTION("-- with standard bias 1.0") {
    GateConfig cfg = GateConfig::from_name("--");
    BiasInit b = init_standard(4, 1.0);
    GatePack p = effective_gates(cfg, zero4, zero4, empty, empty, b);
    for (int i = 0; i < 4; ++i)
      CHECK(p.f[i] == Catch::Approx(0.7310585786300049).epsilon(1e-12));
  }

  SECTION("O- with zero pre-activations is the uniform ramp") {
    GateConfig cfg = GateConfig::from_name("O-");
    BiasInit b = init_standard(4, 0.0);
    GatePack p = effective_gates(cfg, zero4, zero4, empty, empty, b);
    CHECK(p.f[0] == Catch::Approx(0.25).epsilon(1e-12));
    CHECK(p.f[1] == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(p.f[2] == Catch::Approx(0.75).epsilon(1e-12));
    CHECK(p.f[3] == Catch::Approx(1.0).margin(1e-12));
    // input side is 1 - cumax
    CHECK(p.i[0] == Catch::Approx(0.75).epsilon(1e-12));
  }

  SECTION("missing pre-activation names the variant") {
    GateConfig cfg = GateConfig::from_name("UR");
    BiasInit b = init_standard(4, 0.0);
    CHECK_THROWS_WITH(effective_gates(cfg, zero4, empty, empty, empty, b),
                      Catch::Matchers::ContainsSubstring("UR"));
  }

  SECTION("tied variants return exact complements") {
    Rng rng(18);
    for (const char* name : {"-R", "OR", "UR"}) {
      GateConfig cfg = GateConfig::from_name(name);
      BiasInit b = init_standard(4, 0.3);
      Vector pf = rng.uniform_vector(4, -2.0, 2.0);
      Vector pr = rng.uniform_vector(4, -2.0, 2.0);
      GatePack p = effective_gates(cfg, pf, pr, empty, empty, b);
      for (int i = 0; i < 4; ++i)
        CHECK(p.effective_input[i] == 1.0 - p.effective_forget[i]);
    }
  }

  SECTION("master variants with downsize") {
    GateConfig cfg = GateConfig::from_name("UM");
    cfg.downsize_c = 2;
    BiasInit b = init_standard(2, 0.0);  // bias applies to the master gates
    Rng rng(19);
    Vector pf = rng.uniform_vector(4, -1.0, 1.0);
    Vector pi = rng.uniform_vector(4, -1.0, 1.0);
    Vector pmf = rng.uniform_vector(2, -1.0, 1.0);
    Vector pmi = rng.uniform_vector(2, -1.0, 1.0);
    GatePack p = effective_gates(cfg, pf, pi, pmf, pmi, b);
    REQUIRE(p.master_f.size() == 4);
    CHECK(p.master_f[0] == p.master_f[1]);
    CHECK(p.master_f[2] == p.master_f[3]);
    auto [fh, ih] = master_compose(p.f, p.i, p.master_f, p.master_i);
    CHECK((p.effective_forget - fh).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((p.effective_input - ih).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("refine_grad_norm") {
  // hand-evaluated closed form at f = g = 0.5
  CHECK(refine_grad_norm(0.5, 0.5) ==
        Catch::Approx(0.25 * std::sqrt(5.0) / 2.0).epsilon(1e-12));
  // full saturation: f -> 0 on the lower band edge
  CHECK(refine_grad_norm(1e-4, 1e-8) < 1e-6);
  CHECK_THROWS_AS(refine_grad_norm(0.5, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(refine_grad_norm(0.0, 0.0), std::invalid_argument);
}
