#include "trakbench/ingest.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace trakbench {

namespace {
constexpr int kRecordBytes = 3073;
constexpr int kPixelsPerChannel = kCifarImageSide * kCifarImageSide;  // 1024
constexpr int kPooledPerChannel = kCifarPoolSide * kCifarPoolSide;    // 64
constexpr int kPoolFactor = kCifarImageSide / kCifarPoolSide;         // 4
}  // namespace

std::vector<ImageRecord> read_cifar_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff length = in.tellg();
    in.seekg(0, std::ios::beg);
    if (length % kRecordBytes != 0)
        throw std::runtime_error(path + ": truncated file (length not a multiple of 3073)");
    const size_t count = static_cast<size_t>(length / kRecordBytes);
    std::vector<ImageRecord> records(count);
    for (size_t r = 0; r < count; ++r) {
        uint8_t label = 0;
        in.read(reinterpret_cast<char*>(&label), 1);
        in.read(reinterpret_cast<char*>(records[r].pixels.data()), 3072);
        if (!in) throw std::runtime_error(path + ": short read");
        if (label > 9)
            throw std::runtime_error(path + ": label byte " + std::to_string(label) +
                                     " out of range at record " + std::to_string(r));
        records[r].label = label;
    }
    return records;
}

VectorXd pool_record(const ImageRecord& record, double byte_scale) {
    VectorXd out(kCifarFeatureDim);
    for (int c = 0; c < kCifarChannels; ++c) {
        const uint8_t* channel = record.pixels.data() + c * kPixelsPerChannel;
        for (int br = 0; br < kCifarPoolSide; ++br) {
            for (int bc = 0; bc < kCifarPoolSide; ++bc) {
                double sum = 0.0;
                for (int dr = 0; dr < kPoolFactor; ++dr)
                    for (int dc = 0; dc < kPoolFactor; ++dc)
                        sum += channel[(br * kPoolFactor + dr) * kCifarImageSide +
                                       bc * kPoolFactor + dc];
                out(c * kPooledPerChannel + br * kCifarPoolSide + bc) =
                    sum / (kPoolFactor * kPoolFactor) * byte_scale;
            }
        }
    }
    return out;
}

PooledFeatures pool_and_standardize(const std::vector<ImageRecord>& records,
                                    const std::optional<ChannelStats>& stats,
                                    double byte_scale) {
    if (records.empty()) throw std::invalid_argument("no records to pool");
    const int m = static_cast<int>(records.size());
    PooledFeatures out;
    out.features.resize(m, kCifarFeatureDim);
    out.labels.resize(m);
    for (int i = 0; i < m; ++i) {
        out.features.row(i) = pool_record(records[i], byte_scale).transpose();
        out.labels(i) = records[i].label;
    }

    if (stats) {
        out.stats = *stats;
    } else {
        // One scalar mean/std per channel over all pixels and images.
        for (int c = 0; c < kCifarChannels; ++c) {
            auto block = out.features.middleCols(c * kPooledPerChannel, kPooledPerChannel);
            const double count = static_cast<double>(block.size());
            double mean = block.sum() / count;
            double var = (block.array() - mean).square().sum() / count;
            out.stats.mean[c] = mean;
            out.stats.stddev[c] = std::sqrt(var);
        }
    }
    for (int c = 0; c < kCifarChannels; ++c) {
        if (!(out.stats.stddev[c] > 0.0))
            throw std::runtime_error("zero variance in channel " + std::to_string(c) +
                                     "; cannot standardize");
        out.features.middleCols(c * kPooledPerChannel, kPooledPerChannel) =
            (out.features.middleCols(c * kPooledPerChannel, kPooledPerChannel).array() -
             out.stats.mean[c]) /
            out.stats.stddev[c];
    }
    return out;
}

std::vector<ImageRecord> binary_subset(const std::vector<ImageRecord>& records, int class_a,
                                       int class_b) {
    if (class_a == class_b) throw std::invalid_argument("identical classes");
    if (class_a < 0 || class_a > 9 || class_b < 0 || class_b > 9)
        throw std::invalid_argument("class indices must lie in 0..9");
    std::vector<ImageRecord> out;
    for (const ImageRecord& record : records) {
        if (record.label != class_a && record.label != class_b) continue;
        out.push_back(record);
        out.back().label = (record.label == class_a) ? 0 : 1;
    }
    if (out.empty()) throw std::invalid_argument("binary subset is empty");
    bool has_a = false, has_b = false;
    for (const ImageRecord& record : out) {
        has_a |= record.label == 0;
        has_b |= record.label == 1;
    }
    if (!has_a || !has_b)
        throw std::invalid_argument("both classes must be present in the subset");
    return out;
}

}  // namespace trakbench
