#pragma once

#include "tastr/triplet.hpp"

namespace tastr {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment accumulators shaped like the model weights.
struct AdamState {
    AdamConfig cfg;
    long step = 0;
    Gradients m;
    Gradients v;

    static AdamState init(const EmbeddingModel& model, const AdamConfig& cfg);
};

// Standard Adam update with bias correction; increments the step count.
void adam_step(AdamState& state, EmbeddingModel& model, const Gradients& grads);

}  // namespace tastr
