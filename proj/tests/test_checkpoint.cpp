#include <filesystem>
#include <fstream>
#include <catch_amalgamated.hpp>

#include "urgate/checkpoint.hpp"

using namespace urgate;

namespace {
std::filesystem::path tmpdir() {
  auto d = std::filesystem::temp_directory_path() / "urgate_ckpt_test";
  std::filesystem::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("checkpoint round trip") {
  struct Case {
    CellKind kind;
    const char* variant;
    int c;
  };
  for (const Case& tc : {Case{CellKind::Lstm, "UR", 1},
                         Case{CellKind::Gru, "OM", 2},
                         Case{CellKind::Janet, "UM", 1}}) {
    Rng rng(51);
    GateConfig cfg = GateConfig::from_name(tc.variant);
    cfg.downsize_c = tc.c;
    Model m = make_model(tc.kind, cfg, 3, 8, 5, rng);
    const std::string path =
        (tmpdir() / (std::string("rt_") + cell_name(tc.kind) + ".ckpt")).string();
    save_checkpoint(path, m);
    Model back = load_checkpoint(path);
    CHECK(back.cell.kind == tc.kind);
    CHECK(back.cell.cfg.name() == tc.variant);
    CHECK(back.cell.cfg.downsize_c == tc.c);
    auto a = m.named_tensors();
    auto b = back.named_tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].first == b[k].first);
      CHECK((*a[k].second - *b[k].second).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("checkpoint errors") {
  const auto dir = tmpdir();
  CHECK_THROWS_WITH(load_checkpoint((dir / "missing.ckpt").string()),
                    Catch::Matchers::ContainsSubstring("cannot open"));

  const std::string bad = (dir / "bad.ckpt").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOTACKPTxxxxxxxxxxxx";
  }
  CHECK_THROWS_WITH(load_checkpoint(bad),
                    Catch::Matchers::ContainsSubstring("bad magic"));

  // truncate a valid checkpoint inside the payload
  Rng rng(52);
  Model m = make_model(CellKind::Janet, GateConfig::from_name("--"), 2, 4, 1, rng);
  const std::string full = (dir / "full.ckpt").string();
  save_checkpoint(full, m);
  const auto size = std::filesystem::file_size(full);
  const std::string trunc = (dir / "trunc.ckpt").string();
  {
    std::ifstream in(full, std::ios::binary);
    std::vector<char> buf(size - 40);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::ofstream out(trunc, std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  CHECK_THROWS_WITH(load_checkpoint(trunc),
                    Catch::Matchers::ContainsSubstring("truncated"));
}
