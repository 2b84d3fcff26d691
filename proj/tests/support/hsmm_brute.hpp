#pragma once

// Exhaustive HSMM oracle: walks every legal state path of a short
// likelihood matrix and scores it from the definition. Paths follow the
// cycle S1 -> Systole -> S2 -> Diastole; interior runs must fit
// [min, max] frames and earn -(d - mean)^2 / (2 std^2); the first and last
// runs may be cut short (1..max frames) and earn no duration term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

struct BruteDuration {
    std::size_t min, max;
    double mean, std;  // frames
};

struct BruteResult {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> path;
    std::size_t paths = 0;
};

class HsmmBrute {
public:
    HsmmBrute(const std::vector<std::vector<double>>& lik, std::vector<BruteDuration> dur)
        : lik_(lik), dur_(std::move(dur)) {}

    /// Scores an arbitrary path; -inf when it is not legal.
    double score(const std::vector<int>& path) const {
        const double ninf = -std::numeric_limits<double>::infinity();
        if (path.size() != lik_.size() || path.empty()) return ninf;
        double s = 0;
        for (std::size_t t = 0; t < path.size(); ++t) s += std::log(std::max(lik_[t][path[t]], 1e-9));
        std::vector<std::pair<int, std::size_t>> runs;
        for (int st : path) {
            if (!runs.empty() && runs.back().first == st) ++runs.back().second;
            else runs.push_back({st, 1});
        }
        for (std::size_t r = 0; r < runs.size(); ++r) {
            const auto& [st, d] = runs[r];
            if (r > 0 && st != (runs[r - 1].first + 1) % 4) return ninf;
            const auto& du = dur_[st];
            if (d > du.max) return ninf;
            const bool edge = r == 0 || r + 1 == runs.size();
            if (!edge) {
                if (d < du.min) return ninf;
                s += -(double(d) - du.mean) * (double(d) - du.mean) / (2 * du.std * du.std);
            }
        }
        return s;
    }

    /// Walks every legal path. Scores accumulate along the walk; every leaf
    /// within 1e-9 of the running best is rescored with score() so the
    /// reported optimum uses one fixed summation order.
    BruteResult solve() const {
        BruteResult res;
        std::vector<int> path;
        Walk w{res, {}, -std::numeric_limits<double>::infinity()};
        for (int s0 = 0; s0 < 4; ++s0) walk(path, s0, true, 0.0, w);
        for (const auto& [approx, p] : w.near) {
            if (approx < w.running - 1e-9) continue;
            const double s = score(p);
            if (s > res.best) {
                res.best = s;
                res.path = p;
            }
        }
        return res;
    }

private:
    struct Walk {
        BruteResult& res;
        std::vector<std::pair<double, std::vector<int>>> near;
        double running;
    };

    void walk(std::vector<int>& path, int state, bool first, double acc, Walk& w) const {
        const std::size_t T = lik_.size(), left = T - path.size();
        const auto& du = dur_[state];
        double emit = 0;
        for (std::size_t d = 1; d <= std::min(du.max, left); ++d) {
            emit += std::log(std::max(lik_[path.size() + d - 1][state], 1e-9));
            const bool last = d == left;
            if (!first && !last && d < du.min) continue;
            double s = acc + emit;
            if (!first && !last) s += -(double(d) - du.mean) * (double(d) - du.mean) / (2 * du.std * du.std);
            path.insert(path.end(), d, state);
            if (last) {
                ++w.res.paths;
                if (s > w.running) {
                    w.running = s;
                    std::erase_if(w.near, [&](const auto& e) { return e.first < s - 1e-9; });
                }
                if (s >= w.running - 1e-9) w.near.emplace_back(s, path);
            } else {
                walk(path, (state + 1) % 4, false, s, w);
            }
            path.resize(path.size() - d);
        }
    }

    const std::vector<std::vector<double>>& lik_;
    std::vector<BruteDuration> dur_;
};

}  // namespace oracle
