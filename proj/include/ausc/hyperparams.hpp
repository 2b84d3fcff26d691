#pragma once

#include <cstddef>
#include <cstdint>

#include "ausc/error.hpp"

namespace ausc {

/// Training hyper-parameters. Defaults: learning rate, L2 coefficient and
/// dropout keep probability from the published search; batch size 256.
struct Hyperparams {
    double learning_rate = 0.00015822;
    double lambda = 0.000076253698849;
    double keep_prob = 0.85565561;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 2016;

    void validate() const {
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
        if (!(lambda >= 0)) throw ConfigError("lambda must be non-negative");
        if (!(keep_prob > 0 && keep_prob <= 1)) throw ConfigError("keep_prob must be in (0, 1]");
        if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
        if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
    }

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

}  // namespace ausc
