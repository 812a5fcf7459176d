#include "trakbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace trakbench {

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    const size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("pearson: need at least two points");
    double mean_x = 0.0, mean_y = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mean_x;
        double dy = ys[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

// Ranked train indices for one test point: k best under the side's order,
// ties broken by ascending train index.
std::vector<int> ranked_indices(const std::map<int, double>& values, int k, RankSide side) {
    std::vector<std::pair<double, int>> order;
    order.reserve(values.size());
    for (const auto& [train, value] : values)
        order.emplace_back(side == RankSide::kTopK ? -value : value, train);
    std::sort(order.begin(), order.end());
    std::vector<int> out;
    out.reserve(k);
    for (int j = 0; j < k; ++j) out.push_back(order[j].second);
    return out;
}

}  // namespace

RankAlignment rank_alignment(const InfluenceTable& reference, const InfluenceTable& candidate,
                             int k, RankSide side) {
    if (k < 1) throw std::invalid_argument("rank_alignment: k must be >= 1");
    // Regroup per test point and insist on identical breakdown-free grids.
    std::map<int, std::map<int, double>> ref_by_test, cand_by_test;
    for (const auto& [key, entry] : reference.entries) {
        if (entry.breakdown)
            throw std::invalid_argument("rank_alignment: reference table has breakdown entries");
        ref_by_test[key.first][key.second] = entry.value;
    }
    for (const auto& [key, entry] : candidate.entries) {
        if (entry.breakdown)
            throw std::invalid_argument("rank_alignment: candidate table has breakdown entries");
        cand_by_test[key.first][key.second] = entry.value;
    }
    if (ref_by_test.size() != cand_by_test.size())
        throw std::invalid_argument("rank_alignment: tables cover different test points");

    RankAlignment out;
    out.k = k;
    out.side = side;
    double overlap_sum = 0.0;
    for (const auto& [test_id, ref_values] : ref_by_test) {
        auto it = cand_by_test.find(test_id);
        if (it == cand_by_test.end() || it->second.size() != ref_values.size())
            throw std::invalid_argument("rank_alignment: tables cover different grids");
        if (static_cast<size_t>(k) > ref_values.size())
            throw std::invalid_argument("rank_alignment: k exceeds available train indices");
        std::vector<int> ref_rank = ranked_indices(ref_values, k, side);
        std::vector<int> cand_rank = ranked_indices(it->second, k, side);
        if (ref_rank == cand_rank) ++out.exact_match_count;
        std::set<int> ref_set(ref_rank.begin(), ref_rank.end());
        int hits = 0;
        for (int train : cand_rank) hits += ref_set.count(train) ? 1 : 0;
        overlap_sum += static_cast<double>(hits) / static_cast<double>(k);
    }
    out.overlap_ratio = overlap_sum / static_cast<double>(ref_by_test.size());
    return out;
}

std::string to_string(ScalingAxis axis) {
    switch (axis) {
        case ScalingAxis::kN: return "n";
        case ScalingAxis::kP: return "p";
        case ScalingAxis::kK: return "k";
    }
    throw std::logic_error("unknown scaling axis");
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must be in [0,1]");
    std::sort(values.begin(), values.end());
    double pos = p * static_cast<double>(values.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(pos));
    size_t hi = static_cast<size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

ScalingFit scaling_fit(const std::vector<std::pair<double, std::vector<double>>>& samples,
                       ScalingAxis axis) {
    if (samples.size() < 3)
        throw std::invalid_argument("scaling_fit: need at least 3 axis values");
    ScalingFit out;
    out.axis = axis;
    for (const auto& [value, magnitudes] : samples) {
        if (magnitudes.size() < 30)
            throw std::invalid_argument("scaling_fit: need at least 30 samples per axis value");
        if (!(value > 0.0))
            throw std::invalid_argument("scaling_fit: axis values must be positive");
        double med = median(magnitudes);
        if (!(med > 0.0))
            throw std::invalid_argument("scaling_fit: non-positive median, log undefined");
        out.points.emplace_back(std::log(value), std::log(med));
        out.raw_values.push_back(value);
        out.raw_medians.push_back(med);
        out.q1.push_back(quantile(magnitudes, 0.25));
        out.q3.push_back(quantile(magnitudes, 0.75));
    }
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [x, y] : out.points) {
        mean_x += x;
        mean_y += y;
    }
    mean_x /= static_cast<double>(out.points.size());
    mean_y /= static_cast<double>(out.points.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : out.points) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if (sxx <= 0.0) throw std::invalid_argument("scaling_fit: axis values must be distinct");
    out.slope = sxy / sxx;
    out.intercept = mean_y - out.slope * mean_x;
    return out;
}

void common_values(const InfluenceTable& a, const InfluenceTable& b, std::vector<double>& va,
                   std::vector<double>& vb) {
    va.clear();
    vb.clear();
    for (const auto& [key, entry] : a.entries) {
        if (entry.breakdown) continue;
        auto it = b.entries.find(key);
        if (it == b.entries.end() || it->second.breakdown) continue;
        va.push_back(entry.value);
        vb.push_back(it->second.value);
    }
}

}  // namespace trakbench
