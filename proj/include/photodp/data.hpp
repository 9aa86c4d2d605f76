#pragma once

#include "photodp/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace photodp {

/// Flattened image dataset: one row per sample, pixels scaled to [0, 1].
struct LabeledDataset {
    Matrix images;           // num_samples x (rows*cols)
    std::vector<int> labels; // class indices 0..9
    std::size_t image_rows = 0;
    std::size_t image_cols = 0;

    std::size_t size() const { return labels.size(); }
};

struct SplitSpec {
    double validation_fraction = 0.10;
    std::uint64_t seed = 0;
};

/// True when the buffer starts with the gzip magic bytes 0x1f 0x8b.
bool is_gzip(const std::vector<std::uint8_t>& bytes);

/// Inflate a gzip stream (zlib).
std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Parse an IDX3 image payload (magic 0x00000803, big-endian header,
/// unsigned-byte pixels). Pixels are scaled by 1/255. Gzip input is
/// auto-detected.
LabeledDataset load_idx_images(const std::vector<std::uint8_t>& bytes);

/// Parse an IDX1 label payload (magic 0x00000801); every label must be < 10.
std::vector<int> load_idx_labels(const std::vector<std::uint8_t>& bytes);

/// Serialize back to raw IDX bytes; a parse/serialize round trip reproduces
/// the original (uncompressed) file bit-for-bit.
std::vector<std::uint8_t> to_idx_images(const LabeledDataset& ds);
std::vector<std::uint8_t> to_idx_labels(const std::vector<int>& labels);

/// Convenience: read images + labels files (optionally gzipped) and pair
/// them up.
LabeledDataset load_dataset(const std::filesystem::path& images_path,
                            const std::filesystem::path& labels_path);

/// Locate the four canonical IDX files for `name` ("fashion-mnist" or
/// "mnist") under data_dir/name/ and load train and test sets.
std::pair<LabeledDataset, LabeledDataset> load_named_dataset(
    const std::filesystem::path& data_dir, const std::string& name);

/// Deterministic shuffled split into (train, validation): disjoint,
/// exhaustive, identical for identical seeds.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                const SplitSpec& spec);

/// One epoch of minibatch index sets: a fresh permutation chunked into
/// batches of m; the final short batch is dropped so the batch size (and
/// with it the privacy accounting) stays constant across steps.
std::vector<std::vector<std::size_t>> minibatches(std::size_t dataset_size, std::size_t m,
                                                  Rng& epoch_rng);

} // namespace photodp
