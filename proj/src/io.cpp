#include "suplab/io.hpp"

#include "suplab/errors.hpp"

#include <bit>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#ifndef SUPLAB_SOURCE_DIR
#define SUPLAB_SOURCE_DIR "."
#endif

namespace suplab {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32_be(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  std::uint32_t u32_le(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64_le(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64_le(const char* what) { return std::bit_cast<double>(u64_le(what)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

Matrix column(const Vector& v) { return Eigen::Map<const Matrix>(v.data(), v.size(), 1); }

Vector as_vector(const Matrix& m, const char* what) {
  if (m.cols() != 1 && m.size() != 0) throw FormatError(std::string(what) + ": expected a column", 0);
  return Eigen::Map<const Vector>(m.data(), m.size());
}

void expect_magic(const Container& c, const std::array<char, 8>& magic, const char* what) {
  if (c.magic != magic) throw FormatError(std::string(what) + ": wrong magic", 0);
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) throw FormatError(std::string(what) + ": block has the wrong shape", 0);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("line " + std::to_string(line) + ": not a number: '" + text + "'", 0);
  }
  return v;
}

}  // namespace

std::size_t IdxTensor::element_count() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.u8("magic") != 0 || r.u8("magic") != 0) throw FormatError("idx: bad magic", 0);
  IdxTensor t;
  t.dtype = r.u8("magic");
  if (t.dtype != 0x08) throw FormatError("idx: unsupported data type (only unsigned bytes)", 2);
  const std::uint8_t ndim = r.u8("magic");
  if (ndim == 0) throw FormatError("idx: zero dimensions", 3);
  for (std::uint8_t i = 0; i < ndim; ++i) t.shape.push_back(r.u32_be("dimension sizes"));
  const std::size_t n = t.element_count();
  const auto payload = r.take(n, "idx payload");
  t.data.assign(payload.begin(), payload.end());
  if (!r.done()) throw FormatError("idx: trailing bytes after payload", r.offset());
  return t;
}

IdxTensor load_idx(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_idx(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& t) {
  if (t.shape.empty() || t.shape.size() > 255) throw DataError("idx: need 1..255 dimensions");
  if (t.data.size() != t.element_count()) throw DataError("idx: payload size does not match shape");
  std::vector<std::uint8_t> out{0, 0, t.dtype, static_cast<std::uint8_t>(t.shape.size())};
  for (auto s : t.shape) put_u32_be(out, s);
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void write_idx(const fs::path& path, const IdxTensor& t) { write_file(path, encode_idx(t)); }

LabeledData LabeledData::subset(std::span<const std::size_t> indices) const {
  LabeledData out;
  out.classes = classes;
  out.features = Matrix(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels[i] = labels[indices[i]];
  }
  return out;
}

LabeledData idx_to_dataset(const IdxTensor& images, const IdxTensor& labels) {
  if (images.shape.size() < 2) throw FormatError("idx images: need at least 2 dimensions", 3);
  if (labels.shape.size() != 1) throw FormatError("idx labels: need exactly 1 dimension", 3);
  const std::size_t n = images.shape[0];
  if (labels.shape[0] != n) throw FormatError("idx: image and label counts differ", 4);
  const std::size_t d = n == 0 ? 0 : images.element_count() / n;
  LabeledData out;
  out.features = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n * d; ++i) out.features.data()[i] = images.data[i] / 255.0;
  out.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = labels.data[i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.classes = static_cast<std::size_t>(max_label + 1);
  return out;
}

MnistData load_mnist(const fs::path& dir) {
  MnistData m;
  m.directory = dir;
  m.train = idx_to_dataset(load_idx(dir / "train-images-idx3-ubyte"), load_idx(dir / "train-labels-idx1-ubyte"));
  m.test = idx_to_dataset(load_idx(dir / "t10k-images-idx3-ubyte"), load_idx(dir / "t10k-labels-idx1-ubyte"));
  if (m.train.features.cols() != m.test.features.cols()) throw DataError("mnist: train and test image sizes differ");
  m.train.classes = m.test.classes = std::max(m.train.classes, m.test.classes);
  return m;
}

std::optional<fs::path> find_mnist_directory() {
  std::vector<fs::path> candidates;
  if (const char* env = std::getenv("SUPLAB_DATA_DIR"); env != nullptr && *env != '\0') {
    candidates.emplace_back(env);
    candidates.emplace_back(fs::path(env) / "mnist");
  }
  candidates.emplace_back(fs::path(SUPLAB_SOURCE_DIR) / "data" / "mnist5k");
  for (const auto& dir : candidates) {
    std::error_code ec;
    if (fs::exists(dir / "train-images-idx3-ubyte", ec) && fs::exists(dir / "t10k-labels-idx1-ubyte", ec)) return dir;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  std::vector<std::uint8_t> out(c.magic.begin(), c.magic.end());
  put_u32_le(out, c.version);
  put_u32_le(out, static_cast<std::uint32_t>(c.header.size()));
  for (auto h : c.header) put_u64_le(out, h);
  put_u64_le(out, c.matrices.size());
  for (const auto& m : c.matrices) {
    put_u64_le(out, static_cast<std::uint64_t>(m.rows()));
    put_u64_le(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u64_le(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  return out;
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Container c;
  const auto magic = r.take(8, "magic");
  std::memcpy(c.magic.data(), magic.data(), 8);
  c.version = r.u32_le("version");
  if (c.version != 1) throw FormatError("container: unsupported version " + std::to_string(c.version), 8);
  const std::uint32_t nh = r.u32_le("header count");
  r.need(static_cast<std::size_t>(nh) * 8, "header");
  for (std::uint32_t i = 0; i < nh; ++i) c.header.push_back(r.u64_le("header"));
  const std::uint64_t nm = r.u64_le("matrix count");
  for (std::uint64_t k = 0; k < nm; ++k) {
    const std::size_t at = r.offset();
    const std::uint64_t rows = r.u64_le("matrix shape");
    const std::uint64_t cols = r.u64_le("matrix shape");
    if (cols != 0 && rows > (bytes.size() / 8) / cols) throw FormatError("container: matrix larger than file", at);
    r.need(rows * cols * 8, "matrix data");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64_le("matrix data");
    c.matrices.push_back(std::move(m));
  }
  if (!r.done()) throw FormatError("container: trailing bytes", r.offset());
  return c;
}

void write_container(const fs::path& path, const Container& c) { write_file(path, encode_container(c)); }

Container read_container(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_container(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

void save_sae(const fs::path& path, const SaeModel& model) {
  model.validate();
  Container c;
  c.magic = kSaeMagic;
  c.header = {model.concept_dim(), model.feature_dim(), model.sparsity,
              static_cast<std::uint64_t>(model.variant == SaeVariant::threshold), model.use_bias ? 1u : 0u};
  const Vector thresholds = model.variant == SaeVariant::threshold ? model.thresholds : Vector();
  c.matrices = {model.encoder, column(model.bias), model.decoder, column(thresholds)};
  write_container(path, c);
}

SaeModel load_sae(const fs::path& path) {
  const Container c = read_container(path);
  expect_magic(c, kSaeMagic, "sae checkpoint");
  if (c.header.size() != 5 || c.matrices.size() != 4) throw FormatError("sae checkpoint: unexpected layout", 12);
  const auto d1 = static_cast<Eigen::Index>(c.header[0]);
  const auto d2 = static_cast<Eigen::Index>(c.header[1]);
  SaeModel m;
  m.sparsity = c.header[2];
  m.variant = c.header[3] ? SaeVariant::threshold : SaeVariant::top_k;
  m.use_bias = c.header[4] != 0;
  expect_shape(c.matrices[0], d1, d2, "sae encoder");
  expect_shape(c.matrices[2], d2, d1, "sae decoder");
  m.encoder = c.matrices[0];
  m.bias = as_vector(c.matrices[1], "sae bias");
  m.decoder = c.matrices[2];
  m.thresholds = as_vector(c.matrices[3], "sae thresholds");
  try {
    m.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("sae checkpoint: ") + e.what(), 0);
  }
  return m;
}

void save_head(const fs::path& path, const LinearHead& head) {
  Container c;
  c.magic = kHeadMagic;
  c.header = {head.classes(), head.dim()};
  c.matrices = {head.weights, column(head.bias)};
  write_container(path, c);
}

LinearHead load_head(const fs::path& path) {
  const Container c = read_container(path);
  expect_magic(c, kHeadMagic, "head checkpoint");
  if (c.header.size() != 2 || c.matrices.size() != 2) throw FormatError("head checkpoint: unexpected layout", 12);
  const auto classes = static_cast<Eigen::Index>(c.header[0]);
  expect_shape(c.matrices[0], classes, static_cast<Eigen::Index>(c.header[1]), "head weights");
  expect_shape(c.matrices[1], classes, 1, "head bias");
  return {c.matrices[0], as_vector(c.matrices[1], "head bias")};
}

void save_moe(const fs::path& path, const MoeModel& moe) {
  Container c;
  c.magic = kMoeMagic;
  c.header = {moe.size(), moe.base.classes(), moe.base.dim()};
  c.matrices = {moe.centroids, moe.base.weights, column(moe.base.bias)};
  for (const auto& e : moe.experts) {
    c.matrices.push_back(e.weights);
    c.matrices.push_back(column(e.bias));
  }
  write_container(path, c);
}

MoeModel load_moe(const fs::path& path) {
  const Container c = read_container(path);
  expect_magic(c, kMoeMagic, "moe checkpoint");
  if (c.header.size() != 3) throw FormatError("moe checkpoint: unexpected header", 12);
  const std::size_t e = c.header[0];
  const auto classes = static_cast<Eigen::Index>(c.header[1]);
  const auto dim = static_cast<Eigen::Index>(c.header[2]);
  if (c.matrices.size() != 3 + 2 * e) throw FormatError("moe checkpoint: wrong block count", 12);
  MoeModel moe;
  expect_shape(c.matrices[0], static_cast<Eigen::Index>(e), dim, "moe centroids");
  moe.centroids = c.matrices[0];
  auto head_at = [&](std::size_t i) {
    expect_shape(c.matrices[i], classes, dim, "moe head weights");
    expect_shape(c.matrices[i + 1], classes, 1, "moe head bias");
    return LinearHead{c.matrices[i], as_vector(c.matrices[i + 1], "moe head bias")};
  };
  moe.base = head_at(1);
  for (std::size_t k = 0; k < e; ++k) moe.experts.push_back(head_at(3 + 2 * k));
  return moe;
}

Embeddings parse_embeddings_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw DataError("embeddings: empty input");
  std::ptrdiff_t label_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "label") label_col = static_cast<std::ptrdiff_t>(j);
  }
  const std::size_t width = header.size() - (label_col >= 0 ? 1 : 0);
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(cells.size()),
                        0);
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const double v = parse_number(cells[j], line_no);
      if (static_cast<std::ptrdiff_t>(j) == label_col) {
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
    ++rows;
  }
  if (rows == 0) throw DataError("embeddings: no data rows");
  Embeddings e;
  e.values = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  if (label_col >= 0) e.labels = std::move(labels);
  return e;
}

Embeddings load_embeddings(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.empty()) throw DataError(path.string() + ": empty input");
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kEmbeddingMagic.data(), 8) == 0) {
    const Container c = decode_container(bytes);
    if (c.header.size() != 3 || c.matrices.size() != (c.header[2] ? 2u : 1u)) {
      throw FormatError("embeddings: unexpected layout", 12);
    }
    Embeddings e;
    e.values = c.matrices[0];
    if (static_cast<std::uint64_t>(e.values.rows()) != c.header[0] ||
        static_cast<std::uint64_t>(e.values.cols()) != c.header[1]) {
      throw FormatError("embeddings: header does not match data block", 12);
    }
    if (c.header[2]) {
      const Matrix& l = c.matrices[1];
      if (l.rows() != e.values.rows() || l.cols() != 1) throw FormatError("embeddings: label block shape", 0);
      std::vector<int> labels(static_cast<std::size_t>(l.rows()));
      for (Eigen::Index i = 0; i < l.rows(); ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(l(i, 0));
      e.labels = std::move(labels);
    }
    return e;
  }
  return parse_embeddings_csv(std::string(bytes.begin(), bytes.end()));
}

void save_embeddings_binary(const fs::path& path, const Embeddings& e) {
  Container c;
  c.magic = kEmbeddingMagic;
  c.header = {static_cast<std::uint64_t>(e.values.rows()), static_cast<std::uint64_t>(e.values.cols()),
              e.labels ? 1u : 0u};
  c.matrices = {e.values};
  if (e.labels) {
    Matrix l(static_cast<Eigen::Index>(e.labels->size()), 1);
    for (std::size_t i = 0; i < e.labels->size(); ++i) l(static_cast<Eigen::Index>(i), 0) = (*e.labels)[i];
    c.matrices.push_back(std::move(l));
  }
  write_container(path, c);
}

void save_embeddings_csv(const fs::path& path, const Embeddings& e) {
  std::string out;
  for (Eigen::Index j = 0; j < e.values.cols(); ++j) out += (j ? ",x" : "x") + std::to_string(j);
  if (e.labels) out += e.values.cols() ? ",label" : "label";
  out += '\n';
  for (Eigen::Index i = 0; i < e.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(e.values(i, j));
    }
    if (e.labels) out += (e.values.cols() ? "," : "") + std::to_string((*e.labels)[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  write_text(path, out);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace suplab
