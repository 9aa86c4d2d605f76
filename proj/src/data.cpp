#include "photodp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace photodp {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> maybe_gunzip(const std::vector<std::uint8_t>& bytes) {
    return is_gzip(bytes) ? gunzip(bytes) : bytes;
}

} // namespace

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& bytes) {
    z_stream zs{};
    // 15 window bits + 16 selects gzip decoding.
    if (inflateInit2(&zs, 15 + 16) != Z_OK) {
        throw std::runtime_error("gunzip: inflateInit2 failed");
    }
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::vector<std::uint8_t> buf(1 << 16);
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw std::runtime_error("gunzip: corrupt gzip stream");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw std::runtime_error("gunzip: truncated gzip stream");
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    const std::streamsize size = is.tellg();
    is.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    is.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    return bytes;
}

LabeledDataset load_idx_images(const std::vector<std::uint8_t>& raw) {
    const std::vector<std::uint8_t> bytes = maybe_gunzip(raw);
    if (bytes.size() < 16) throw std::runtime_error("idx images: truncated header");
    if (read_be32(bytes.data()) != kImageMagic) {
        throw std::runtime_error("idx images: wrong magic");
    }
    const std::size_t count = read_be32(bytes.data() + 4);
    const std::size_t rows = read_be32(bytes.data() + 8);
    const std::size_t cols = read_be32(bytes.data() + 12);
    const std::size_t pixels = rows * cols;
    if (bytes.size() != 16 + count * pixels) {
        throw std::runtime_error("idx images: payload size does not match header");
    }
    LabeledDataset ds;
    ds.image_rows = rows;
    ds.image_cols = cols;
    ds.images = Matrix(count, pixels);
    const std::uint8_t* p = bytes.data() + 16;
    double* out = ds.images.data();
    for (std::size_t i = 0; i < count * pixels; ++i) {
        out[i] = static_cast<double>(p[i]) / 255.0;
    }
    return ds;
}

std::vector<int> load_idx_labels(const std::vector<std::uint8_t>& raw) {
    const std::vector<std::uint8_t> bytes = maybe_gunzip(raw);
    if (bytes.size() < 8) throw std::runtime_error("idx labels: truncated header");
    if (read_be32(bytes.data()) != kLabelMagic) {
        throw std::runtime_error("idx labels: wrong magic");
    }
    const std::size_t count = read_be32(bytes.data() + 4);
    if (bytes.size() != 8 + count) {
        throw std::runtime_error("idx labels: payload size does not match header");
    }
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t v = bytes[8 + i];
        if (v >= 10) throw std::runtime_error("idx labels: label out of range");
        labels[i] = static_cast<int>(v);
    }
    return labels;
}

std::vector<std::uint8_t> to_idx_images(const LabeledDataset& ds) {
    std::vector<std::uint8_t> out;
    const std::size_t pixels = ds.image_rows * ds.image_cols;
    out.reserve(16 + ds.images.rows() * pixels);
    write_be32(out, kImageMagic);
    write_be32(out, static_cast<std::uint32_t>(ds.images.rows()));
    write_be32(out, static_cast<std::uint32_t>(ds.image_rows));
    write_be32(out, static_cast<std::uint32_t>(ds.image_cols));
    const double* p = ds.images.data();
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        out.push_back(static_cast<std::uint8_t>(std::lround(p[i] * 255.0)));
    }
    return out;
}

std::vector<std::uint8_t> to_idx_labels(const std::vector<int>& labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    write_be32(out, kLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int v : labels) out.push_back(static_cast<std::uint8_t>(v));
    return out;
}

LabeledDataset load_dataset(const std::filesystem::path& images_path,
                            const std::filesystem::path& labels_path) {
    LabeledDataset ds = load_idx_images(read_file(images_path));
    ds.labels = load_idx_labels(read_file(labels_path));
    if (ds.labels.size() != ds.images.rows()) {
        throw std::runtime_error("dataset: image/label count mismatch");
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> load_named_dataset(
    const std::filesystem::path& data_dir, const std::string& name) {
    const std::filesystem::path base = data_dir / name;
    auto pick = [&base](const std::string& stem) {
        const std::filesystem::path plain = base / stem;
        const std::filesystem::path gz = base / (stem + ".gz");
        if (std::filesystem::exists(plain)) return plain;
        if (std::filesystem::exists(gz)) return gz;
        throw std::runtime_error("missing dataset file " + plain.string() +
                                 " (run `photodp fetch-data` or pass --data-dir)");
    };
    LabeledDataset train = load_dataset(pick("train-images-idx3-ubyte"),
                                        pick("train-labels-idx1-ubyte"));
    LabeledDataset test = load_dataset(pick("t10k-images-idx3-ubyte"),
                                       pick("t10k-labels-idx1-ubyte"));
    return {std::move(train), std::move(test)};
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                const SplitSpec& spec) {
    if (spec.validation_fraction <= 0.0 || spec.validation_fraction >= 1.0) {
        throw std::invalid_argument("split: validation fraction must be in (0,1)");
    }
    const std::size_t n = ds.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(spec.seed);
    // Fisher-Yates with the seeded stream.
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(spec.validation_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val;

    auto take = [&ds](std::span<const std::size_t> which) {
        LabeledDataset out;
        out.image_rows = ds.image_rows;
        out.image_cols = ds.image_cols;
        out.images = Matrix(which.size(), ds.images.cols());
        out.labels.resize(which.size());
        for (std::size_t i = 0; i < which.size(); ++i) {
            std::memcpy(out.images.data() + i * out.images.cols(),
                        ds.images.data() + which[i] * ds.images.cols(),
                        ds.images.cols() * sizeof(double));
            out.labels[i] = ds.labels[which[i]];
        }
        return out;
    };
    return {take({idx.data(), n_train}), take({idx.data() + n_train, n_val})};
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t dataset_size, std::size_t m,
                                                  Rng& epoch_rng) {
    if (m == 0) throw std::invalid_argument("minibatches: batch size must be positive");
    if (m > dataset_size) {
        throw std::invalid_argument("minibatches: batch size exceeds dataset size");
    }
    std::vector<std::size_t> idx(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) idx[i] = i;
    for (std::size_t i = dataset_size; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(epoch_rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    batches.reserve(dataset_size / m);
    for (std::size_t begin = 0; begin + m <= dataset_size; begin += m) {
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                             idx.begin() + static_cast<std::ptrdiff_t>(begin + m));
    }
    return batches;
}

} // namespace photodp
