#include "qttfem/tt_io.hpp"

#include "qttfem/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace qttfem {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFFU));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>((bits >> s) & 0xFFU));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * s);
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int s = 0; s < 8; ++s) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * s);
    return std::bit_cast<double>(v);
  }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("QTT1: truncated container");
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode(ContainerKind kind, const std::vector<Core>& cores, std::span<const Index> rows,
                                 std::span<const Index> cols) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(kind));
  put_u32(out, static_cast<std::uint32_t>(cores.size()));
  for (std::size_t k = 0; k < cores.size(); ++k) {
    const Core& c = cores[k];
    const Index m = rows[k];
    const Index n = cols[k];
    put_u32(out, static_cast<std::uint32_t>(c.left));
    put_u32(out, static_cast<std::uint32_t>(m));
    put_u32(out, static_cast<std::uint32_t>(n));
    put_u32(out, static_cast<std::uint32_t>(c.right));
    for (Index a = 0; a < c.left; ++a)
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j)
          for (Index b = 0; b < c.right; ++b) put_f64(out, c(a, i + m * j, b));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_container(const TensorTrain& t) {
  const auto dims = t.mode_dims();
  const std::vector<Index> ones(dims.size(), 1);
  return encode(ContainerKind::vector, t.cores(), dims, ones);
}

std::vector<std::uint8_t> encode_container(const TTOperator& op) {
  return encode(ContainerKind::op, op.cores(), op.row_dims(), op.col_dims());
}

StoredTrain decode_container(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  in.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("QTT1: bad magic");
  in.skip(4);
  const std::uint32_t kind = in.u32();
  if (kind > 1) throw FormatError("QTT1: unknown kind tag " + std::to_string(kind));
  const std::uint32_t count = in.u32();
  if (count == 0) throw FormatError("QTT1: empty train");
  std::vector<Core> cores;
  std::vector<Index> rows, cols;
  for (std::uint32_t k = 0; k < count; ++k) {
    const Index l = in.u32();
    const Index m = in.u32();
    const Index n = in.u32();
    const Index r = in.u32();
    if (l == 0 || m == 0 || n == 0 || r == 0) throw FormatError("QTT1: zero dimension in core " + std::to_string(k));
    if (kind == 0 && n != 1) throw FormatError("QTT1: vector core with cols != 1");
    const auto count_values = static_cast<std::size_t>(l * m * n * r);
    if (count_values > in.remaining() / 8) throw FormatError("QTT1: truncated core " + std::to_string(k));
    Core c(l, m * n, r);
    for (Index a = 0; a < l; ++a)
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j)
          for (Index b = 0; b < r; ++b) c(a, i + m * j, b) = in.f64();
    cores.push_back(std::move(c));
    rows.push_back(m);
    cols.push_back(n);
  }
  if (in.remaining() != 0) throw FormatError("QTT1: trailing bytes after last core");
  try {
    if (kind == 0) return TensorTrain(std::move(cores));
    return TTOperator(std::move(cores), std::move(rows), std::move(cols));
  } catch (const DomainError& e) {
    throw FormatError(std::string("QTT1: inconsistent ranks: ") + e.what());
  }
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("QTT1: cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

void save_container(const std::filesystem::path& path, const TensorTrain& t) { write_bytes(path, encode_container(t)); }

void save_container(const std::filesystem::path& path, const TTOperator& op) {
  write_bytes(path, encode_container(op));
}

StoredTrain load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("QTT1: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace qttfem
