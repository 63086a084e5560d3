#pragma once

// Independent re-implementation of the message-fusion procedure, written
// set-first: build every S_i explicitly, scan thresholds, fall back to the
// global mean. No shared code with dwmark::fuse; used as the test oracle.

#include <algorithm>
#include <vector>

#include "dwmark/message.hpp"

namespace dwmark::testsupport {

inline Message fusion_oracle(const std::vector<SoftMessage>& msgs, int t_max, int k_min) {
    const int n = static_cast<int>(msgs.size());
    const int len = static_cast<int>(msgs[0].size());
    auto bin = [](const SoftMessage& m) {
        Message out;
        for (double v : m) out.push_back(v >= 0.5 ? 1 : 0);
        return out;
    };
    std::vector<std::vector<int>> s(n, std::vector<int>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Message a = bin(msgs[i]), b = bin(msgs[j]);
            int d = 0;
            for (int x = 0; x < len; ++x) d += (a[x] - b[x]) * (a[x] - b[x]);
            s[i][j] = d;
        }
    auto mean_binarized = [&](const std::vector<int>& members) {
        Message out(len);
        for (int x = 0; x < len; ++x) {
            double acc = 0;
            for (int j : members) acc += msgs[j][x];
            out[x] = (acc / members.size()) >= 0.5 ? 1 : 0;
        }
        return out;
    };
    for (int t = 0; t <= t_max; ++t) {
        int arg = -1, best = -1;
        for (int i = 0; i < n; ++i) {
            int cnt = static_cast<int>(std::count_if(s[i].begin(), s[i].end(), [&](int d) { return d <= t; }));
            if (cnt > best) {
                best = cnt;
                arg = i;
            }
        }
        if (best >= k_min) {
            std::vector<int> members;
            for (int j = 0; j < n; ++j)
                if (s[arg][j] <= t) members.push_back(j);
            return mean_binarized(members);
        }
    }
    std::vector<int> all(n);
    for (int j = 0; j < n; ++j) all[j] = j;
    return mean_binarized(all);
}

}  // namespace dwmark::testsupport
