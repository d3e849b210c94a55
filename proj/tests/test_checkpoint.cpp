#include <doctest.h>

#include "equifm/checkpoint.hpp"

#include <filesystem>
#include <fstream>

using namespace equifm;

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "equifm_ckpt_test.eqfm";
  VectorFieldModel m({2, 8, 6}, 42);
  m.mutable_parameters()[3] = 0.125;
  save_checkpoint(m, FeatureLayout{}, path);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.model.dims() == m.dims());
  CHECK(ck.model.seed() == 42);
  CHECK(ck.model.parameters() == m.parameters());
  CHECK(ck.layout == FeatureLayout{});

  SUBCASE("header bytes") {
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::string(magic, 8) == "EQFMCKPT");
    unsigned char v[4];
    in.read(reinterpret_cast<char*>(v), 4);
    CHECK(v[0] == 1);
    CHECK(v[1] + v[2] + v[3] == 0);
    const auto size = std::filesystem::file_size(path);
    // 8 magic + 6 u32 + 5 symbols (1 + 1 byte each) + 1 flag + 2 u64 + 8 per parameter.
    CHECK(size == 8 + 24 + 10 + 1 + 16 + 8 * parameter_count(m.dims()));
  }
  SUBCASE("corrupt files are rejected") {
    const auto bad = dir / "equifm_ckpt_bad.eqfm";
    {
      std::ofstream out(bad, std::ios::binary);
      out << "NOTACKPT";
    }
    CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) + 8);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 12);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::filesystem::remove(bad);
  }
  SUBCASE("layout width must match") {
    FeatureLayout narrow;
    narrow.charge_channel = false;
    CHECK_THROWS_AS(save_checkpoint(m, narrow, path), CheckpointError);
  }
  std::filesystem::remove(path);
}
