#include "dcnmt/serialize.hpp"

#include <bit>
#include <istream>
#include <ostream>
#include <set>

#include "dcnmt/error.hpp"

namespace dcnmt {

namespace {

// Largest tensor a file may declare; guards allocation on corrupt input.
constexpr std::uint64_t kMaxTensorEntries = std::uint64_t{1} << 32;
constexpr std::uint32_t kMaxStringLength = 1u << 20;

}  // namespace

void BinaryWriter::bytes(std::string_view data) {
  os_.write(data.data(), static_cast<std::streamsize>(data.size()));
}

void BinaryWriter::u8(std::uint8_t v) { os_.put(static_cast<char>(v)); }

void BinaryWriter::u32(std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os_.write(buf, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os_.write(buf, 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

void BinaryWriter::tensor(std::string_view name, const Tensor& t) {
  string(name);
  u64(t.rows());
  u64(t.cols());
  for (double v : t.data()) f64(v);
}

std::string BinaryReader::bytes(std::size_t n, std::string_view what) {
  std::string out(n, '\0');
  is_.read(out.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is_.gcount()) != n) {
    throw CorruptionError("file truncated while reading " + std::string(what));
  }
  return out;
}

std::uint8_t BinaryReader::u8(std::string_view what) {
  return static_cast<std::uint8_t>(bytes(1, what)[0]);
}

std::uint32_t BinaryReader::u32(std::string_view what) {
  const std::string b = bytes(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64(std::string_view what) {
  const std::string b = bytes(8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double BinaryReader::f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

std::string BinaryReader::string(std::string_view what) {
  const std::uint32_t n = u32(what);
  if (n > kMaxStringLength) throw CorruptionError("implausible string length in " + std::string(what));
  return bytes(n, what);
}

std::pair<std::string, Tensor> BinaryReader::tensor() {
  std::string name = string("tensor name");
  const std::string what = "tensor '" + name + "'";
  const std::uint64_t rows = u64(what);
  const std::uint64_t cols = u64(what);
  if (cols != 0 && rows > kMaxTensorEntries / cols) {
    throw CorruptionError("implausible shape for " + what);
  }
  std::vector<double> data(rows * cols);
  const std::string raw = bytes(data.size() * 8, what);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i * 8 + k])) << (8 * k);
    }
    data[i] = std::bit_cast<double>(v);
  }
  return {std::move(name), Tensor(rows, cols, std::move(data))};
}

bool BinaryReader::at_end() { return is_.peek() == std::char_traits<char>::eof(); }

void write_header(BinaryWriter& w, std::string_view magic, std::uint32_t version) {
  w.bytes(magic);
  w.u32(version);
}

void read_header(BinaryReader& r, std::string_view magic, std::uint32_t version) {
  std::string found;
  try {
    found = r.bytes(magic.size(), "magic");
  } catch (const CorruptionError&) {
    throw VersionError("file too short to hold the " + std::string(magic) + " magic");
  }
  if (found != magic) throw VersionError("bad magic: expected " + std::string(magic));
  std::uint32_t v = 0;
  try {
    v = r.u32("format version");
  } catch (const CorruptionError&) {
    throw VersionError("file too short to hold a format version");
  }
  if (v != version) {
    throw VersionError("unsupported " + std::string(magic) + " format version " + std::to_string(v) +
                       " (expected " + std::to_string(version) + ")");
  }
}

void write_tensors(BinaryWriter& w, const std::vector<const Parameter*>& params) {
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) w.tensor(p->name, p->value);
}

void read_tensors_into(BinaryReader& r, const std::vector<Parameter*>& params) {
  const std::uint32_t count = r.u32("tensor count");
  if (count != params.size()) {
    throw FormatError("file holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : params) by_name.emplace(p->name, p);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = r.tensor();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unexpected tensor '" + name + "'");
    if (!seen.insert(name).second) throw FormatError("duplicate tensor '" + name + "'");
    Parameter& p = *it->second;
    if (!t.same_shape(p.value)) {
      throw ShapeError("tensor '" + name + "' has shape " + t.shape_string() + ", config implies " +
                       p.value.shape_string());
    }
    p.value = std::move(t);
    p.grad = Tensor(p.value.rows(), p.value.cols());
  }
}

}  // namespace dcnmt
