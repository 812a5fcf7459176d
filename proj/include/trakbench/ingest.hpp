#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trakbench/model.hpp"

// CIFAR binary ingestion: 3073-byte records (label + 32x32x3 pixels) pooled
// down to 8x8x3 features with channel-wise standardization.

namespace trakbench {

struct ImageRecord {
    uint8_t label = 0;                  // class index 0-9
    std::array<uint8_t, 3072> pixels{}; // 1024 R, 1024 G, 1024 B, row-major
};

inline constexpr int kCifarImageSide = 32;
inline constexpr int kCifarPoolSide = 8;
inline constexpr int kCifarChannels = 3;
inline constexpr int kCifarFeatureDim =
    kCifarPoolSide * kCifarPoolSide * kCifarChannels;  // 192

struct ChannelStats {
    std::array<double, kCifarChannels> mean{};
    std::array<double, kCifarChannels> stddev{};
};

struct PooledFeatures {
    MatrixXd features;  // m x 192, channel-major (R block, G block, B block)
    VectorXd labels;
    ChannelStats stats;  // the statistics that were applied
};

// Reads 3073-byte records in file order. Throws on truncated files and on
// label bytes above 9.
std::vector<ImageRecord> read_cifar_binary(const std::string& path);

// 4x4 average pooling per channel after mapping bytes through byte_scale,
// then channel-wise standardization. stats absent: compute from this input
// (training partition); present: apply as-is (test partition). byte_scale is
// exposed only so tests can assert the /255 choice washes out.
PooledFeatures pool_and_standardize(const std::vector<ImageRecord>& records,
                                    const std::optional<ChannelStats>& stats = std::nullopt,
                                    double byte_scale = 1.0 / 255.0);

// Pooled (unstandardized) features of a single record.
VectorXd pool_record(const ImageRecord& record, double byte_scale = 1.0 / 255.0);

// Keeps class_a and class_b records in order, remapped to labels {0, 1}.
std::vector<ImageRecord> binary_subset(const std::vector<ImageRecord>& records, int class_a,
                                       int class_b);

}  // namespace trakbench
