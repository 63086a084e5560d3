#pragma once

#include <stdexcept>
#include <vector>

#include "dwmark/message.hpp"

namespace dwmark {

struct FusionConfig {
    int max_bit_difference = 5;  // threshold sweep upper limit T
    int min_cluster = 2;         // smallest number of messages K

    void validate() const {
        if (max_bit_difference < 0) throw std::invalid_argument("fusion: T must be >= 0");
        if (min_cluster < 1) throw std::invalid_argument("fusion: K must be >= 1");
    }
};

// N x N matrix of pairwise bit differences between binarized messages.
struct DifferenceMatrix {
    int n = 0;
    std::vector<int> d;  // row major

    int at(int i, int j) const { return d[static_cast<std::size_t>(i) * n + j]; }
};

inline DifferenceMatrix pairwise_differences(const std::vector<SoftMessage>& msgs) {
    if (msgs.empty()) throw std::invalid_argument("pairwise_differences: empty message list");
    std::vector<Message> bin(msgs.size());
    for (std::size_t i = 0; i < msgs.size(); ++i) {
        if (msgs[i].size() != msgs[0].size())
            throw std::invalid_argument("pairwise_differences: message length mismatch");
        bin[i] = binarize(msgs[i]);
    }
    DifferenceMatrix m;
    m.n = static_cast<int>(msgs.size());
    m.d.assign(static_cast<std::size_t>(m.n) * m.n, 0);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) m.d[static_cast<std::size_t>(i) * m.n + j] = hamming_distance(bin[i], bin[j]);
    return m;
}

// Similarity-based fusion: sweep t = 0..T, pick the row with the largest set
// {j : D[i][j] <= t} (ties to the lowest i). Once that set reaches K members,
// return the binarized mean of its soft messages. If no t qualifies, fall
// back to the binarized mean over all N messages. The diagonal counts toward
// the set size.
inline Message fuse(const std::vector<SoftMessage>& msgs, const FusionConfig& cfg = {}) {
    cfg.validate();
    DifferenceMatrix diff = pairwise_differences(msgs);
    const int n = diff.n;
    const std::size_t len = msgs[0].size();

    auto mean_of = [&](const std::vector<int>& members) {
        SoftMessage mean(len, 0.0);
        for (int j : members)
            for (std::size_t b = 0; b < len; ++b) mean[b] += msgs[j][b];
        for (auto& v : mean) v /= static_cast<double>(members.size());
        return binarize(mean);
    };

    for (int t = 0; t <= cfg.max_bit_difference; ++t) {
        int best_i = 0, best_count = -1;
        for (int i = 0; i < n; ++i) {
            int count = 0;
            for (int j = 0; j < n; ++j) count += diff.at(i, j) <= t;
            if (count > best_count) {
                best_count = count;
                best_i = i;
            }
        }
        if (best_count >= cfg.min_cluster) {
            std::vector<int> members;
            for (int j = 0; j < n; ++j)
                if (diff.at(best_i, j) <= t) members.push_back(j);
            return mean_of(members);
        }
    }

    std::vector<int> all(n);
    for (int j = 0; j < n; ++j) all[j] = j;
    return mean_of(all);
}

}  // namespace dwmark
