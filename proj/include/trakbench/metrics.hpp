#pragma once

#include <string>
#include <vector>

#include "trakbench/influence.hpp"

// Evaluation metrics: Pearson correlation, top-k/bottom-k rank alignment,
// and log-log magnitude-scaling fits.

namespace trakbench {

// Sample Pearson coefficient; throws on length mismatch, fewer than two
// points, or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

enum class RankSide { kTopK, kBottomK };

struct RankAlignment {
    int k = 0;
    int exact_match_count = 0;  // test points whose ordered top-k lists agree
    double overlap_ratio = 0.0; // |set intersection| / k, averaged over tests
    RankSide side = RankSide::kTopK;
};

// Per test point, takes the k most positive (TopK) or most negative (BottomK)
// training indices under each table; ties break toward the smaller train
// index. Both tables must cover the same breakdown-free grid.
RankAlignment rank_alignment(const InfluenceTable& reference, const InfluenceTable& candidate,
                             int k, RankSide side);

enum class ScalingAxis { kN, kP, kK };
std::string to_string(ScalingAxis axis);

struct ScalingFit {
    ScalingAxis axis = ScalingAxis::kN;
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<std::pair<double, double>> points;  // (log axis value, log median)
    std::vector<double> raw_values;   // axis values as given
    std::vector<double> raw_medians;  // medians (raw scale), per axis value
    std::vector<double> q1;           // first quartiles (raw scale)
    std::vector<double> q3;           // third quartiles
};

// Least-squares line through (log value, log median |sample|); needs at
// least 3 axis values with >= 30 samples each and positive medians.
ScalingFit scaling_fit(const std::vector<std::pair<double, std::vector<double>>>& samples,
                       ScalingAxis axis);

double median(std::vector<double> values);
// p in [0,1]; linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

// Shared finite (non-breakdown) entries of two tables, in key order.
void common_values(const InfluenceTable& a, const InfluenceTable& b, std::vector<double>& va,
                   std::vector<double>& vb);

}  // namespace trakbench
