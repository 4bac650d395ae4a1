#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "hida/field_io.hpp"
#include "hida/geomodel.hpp"

using namespace hida;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hida_fio_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("binary field roundtrips exactly") {
  TempDir tmp;
  GridSpec grid{3, 4, 2, 25.0, 50.0, 2.5};
  const FieldRealization f = generate_field(HyperParams{}, grid, 404);
  const fs::path file = tmp.path / "field.bin";
  write_field_binary(file, grid, f.log_k);

  std::vector<double> back;
  const GridSpec read = read_field_binary(file, back);
  CHECK(read == grid);
  CHECK(back == f.log_k);
}

TEST_CASE("binary header starts with the magic") {
  TempDir tmp;
  GridSpec grid{2, 2, 1, 1.0, 1.0, 1.0};
  const fs::path file = tmp.path / "field.bin";
  write_field_binary(file, grid, std::vector<double>(4, 1.0));

  std::ifstream in(file, std::ios::binary);
  std::int64_t magic = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  CHECK(magic == kFieldMagic);
}

TEST_CASE("corrupted magic is rejected") {
  TempDir tmp;
  GridSpec grid{2, 2, 1, 1.0, 1.0, 1.0};
  const fs::path file = tmp.path / "field.bin";
  write_field_binary(file, grid, std::vector<double>(4, 1.0));
  {
    std::fstream io(file, std::ios::binary | std::ios::in | std::ios::out);
    io.seekp(0);
    const std::int64_t bad = 0;
    io.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
  }
  std::vector<double> values;
  CHECK_THROWS((void)read_field_binary(file, values));
}

TEST_CASE("size mismatch between header and payload is rejected") {
  TempDir tmp;
  GridSpec grid{4, 4, 1, 1.0, 1.0, 1.0};
  const fs::path file = tmp.path / "field.bin";
  write_field_binary(file, grid, std::vector<double>(16, 2.0));
  fs::resize_file(file, fs::file_size(file) - sizeof(double));
  std::vector<double> values;
  CHECK_THROWS((void)read_field_binary(file, values));
}

TEST_CASE("missing file raises") {
  std::vector<double> values;
  CHECK_THROWS((void)read_field_binary("/nonexistent/field.bin", values));
}

TEST_CASE("csv export lists every cell with indices") {
  TempDir tmp;
  GridSpec grid{2, 2, 2, 1.0, 1.0, 1.0};
  std::vector<double> values(8);
  for (int c = 0; c < 8; ++c) values[c] = 0.5 * c;
  const fs::path file = tmp.path / "field.csv";
  write_field_csv(file, grid, values);

  std::ifstream in(file);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "i,j,k,value");
  int rows = 0;
  bool saw_last = false;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("1,1,1,", 0) == 0) saw_last = true;
  }
  CHECK(rows == 8);
  CHECK(saw_last);
}
