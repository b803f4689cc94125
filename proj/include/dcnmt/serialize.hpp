#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dcnmt/param.hpp"
#include "dcnmt/tensor.hpp"

namespace dcnmt {

// Little-endian primitives shared by the model and classifier file formats.
// A tensor record is: u32 name length, name bytes, u64 rows, u64 cols, then
// rows·cols IEEE-754 doubles in row-major order.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(std::string_view data);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void string(std::string_view s);
  void tensor(std::string_view name, const Tensor& t);

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  // `what` names the field in the CorruptionError raised on truncation.
  std::string bytes(std::size_t n, std::string_view what);
  std::uint8_t u8(std::string_view what);
  std::uint32_t u32(std::string_view what);
  std::uint64_t u64(std::string_view what);
  double f64(std::string_view what);
  std::string string(std::string_view what);
  std::pair<std::string, Tensor> tensor();
  bool at_end();

 private:
  std::istream& is_;
};

// Magic bytes followed by a u32 format version. VersionError on mismatch.
void write_header(BinaryWriter& w, std::string_view magic, std::uint32_t version);
void read_header(BinaryReader& r, std::string_view magic, std::uint32_t version);

void write_tensors(BinaryWriter& w, const std::vector<const Parameter*>& params);
// Reads a u32 count and that many tensor records, then copies each into the
// parameter of the same name. Missing, unknown or duplicate names are
// FormatErrors; a shape that differs from the parameter is a ShapeError.
void read_tensors_into(BinaryReader& r, const std::vector<Parameter*>& params);

}  // namespace dcnmt
