#pragma once

#include "suplab/classifiers.hpp"
#include "suplab/numeric.hpp"
#include "suplab/sae.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace suplab {

/// IDX tensor: big-endian header (0, 0, dtype, ndim), ndim u32 sizes, raw data.
struct IdxTensor {
  std::uint8_t dtype = 0x08;  // 0x08 = unsigned byte, the only type MNIST uses
  std::vector<std::uint32_t> shape;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
};

/// Parses an in-memory IDX file. Errors are FormatError with the byte offset.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor load_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);
void write_idx(const std::filesystem::path& path, const IdxTensor& tensor);

struct LabeledData {
  Matrix features;  // N x d
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Rows `indices` of this dataset, in the given order.
  LabeledData subset(std::span<const std::size_t> indices) const;
};

/// Images (N x rows x cols, bytes) scaled to [0, 1], paired with byte labels.
LabeledData idx_to_dataset(const IdxTensor& images, const IdxTensor& labels);

struct MnistData {
  LabeledData train;
  LabeledData test;
  std::filesystem::path directory;
};

/// Reads train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte
/// and t10k-labels-idx1-ubyte from `directory`.
MnistData load_mnist(const std::filesystem::path& directory);

/// First directory holding the four MNIST files among $SUPLAB_DATA_DIR,
/// $SUPLAB_DATA_DIR/mnist and the bundled subset in the source tree.
std::optional<std::filesystem::path> find_mnist_directory();

/// Generic binary container: 8-byte magic, u32 version, u32 header count,
/// u64 header values, u64 matrix count, then per matrix u64 rows, u64 cols and
/// row-major float64 entries. Everything little-endian.
struct Container {
  std::array<char, 8> magic{};
  std::uint32_t version = 1;
  std::vector<std::uint64_t> header;
  std::vector<Matrix> matrices;
};

inline constexpr std::array<char, 8> kSaeMagic{'S', 'U', 'P', 'L', 'S', 'A', 'E', '\0'};
inline constexpr std::array<char, 8> kHeadMagic{'S', 'U', 'P', 'L', 'H', 'E', 'A', 'D'};
inline constexpr std::array<char, 8> kMoeMagic{'S', 'U', 'P', 'L', 'M', 'O', 'E', '\0'};
inline constexpr std::array<char, 8> kEmbeddingMagic{'S', 'U', 'P', 'L', 'E', 'M', 'B', '\0'};

std::vector<std::uint8_t> encode_container(const Container& c);
Container decode_container(std::span<const std::uint8_t> bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

void save_sae(const std::filesystem::path& path, const SaeModel& model);
SaeModel load_sae(const std::filesystem::path& path);
void save_head(const std::filesystem::path& path, const LinearHead& head);
LinearHead load_head(const std::filesystem::path& path);
void save_moe(const std::filesystem::path& path, const MoeModel& moe);
MoeModel load_moe(const std::filesystem::path& path);

struct Embeddings {
  Matrix values;
  std::optional<std::vector<int>> labels;
};

/// Binary container (by magic) or CSV with a header row. A CSV column named
/// "label" becomes the label vector.
Embeddings load_embeddings(const std::filesystem::path& path);
Embeddings parse_embeddings_csv(const std::string& text);
void save_embeddings_binary(const std::filesystem::path& path, const Embeddings& e);
void save_embeddings_csv(const std::filesystem::path& path, const Embeddings& e);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace suplab
