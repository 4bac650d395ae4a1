#include "hida/field_io.hpp"

#include <cstdio>
#include <fstream>

namespace hida {

namespace {
void write_i64(std::ofstream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ofstream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::int64_t read_i64(std::ifstream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double read_f64(std::ifstream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void write_field_binary(const std::filesystem::path& path, const GridSpec& grid,
                        const std::vector<double>& values) {
  if (static_cast<int>(values.size()) != grid.cell_count())
    throw std::invalid_argument("write_field_binary: value count != cell count");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_field_binary: cannot open " + path.string());
  write_i64(os, kFieldMagic);
  write_i64(os, grid.nx);
  write_i64(os, grid.ny);
  write_i64(os, grid.nz);
  write_f64(os, grid.dx);
  write_f64(os, grid.dy);
  write_f64(os, grid.dz);
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write_field_binary: write failed for " + path.string());
}

GridSpec read_field_binary(const std::filesystem::path& path,
                           std::vector<double>& values) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_field_binary: cannot open " + path.string());
  if (read_i64(is) != kFieldMagic)
    throw std::runtime_error("read_field_binary: bad magic in " + path.string());
  GridSpec grid;
  grid.nx = static_cast<int>(read_i64(is));
  grid.ny = static_cast<int>(read_i64(is));
  grid.nz = static_cast<int>(read_i64(is));
  grid.dx = read_f64(is);
  grid.dy = read_f64(is);
  grid.dz = read_f64(is);
  grid.validate();
  values.resize(static_cast<std::size_t>(grid.cell_count()));
  is.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("read_field_binary: truncated file " + path.string());
  return grid;
}

void write_field_csv(const std::filesystem::path& path, const GridSpec& grid,
                     const std::vector<double>& values) {
  if (static_cast<int>(values.size()) != grid.cell_count())
    throw std::invalid_argument("write_field_csv: value count != cell count");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_field_csv: cannot open " + path.string());
  os << "i,j,k,value\n";
  char buf[64];
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", values[static_cast<std::size_t>(grid.index(i, j, k))]);
        os << i << ',' << j << ',' << k << ',' << buf << '\n';
      }
}

}  // namespace hida
