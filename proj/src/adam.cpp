#include "tastr/adam.hpp"

#include <cmath>

#include "tastr/errors.hpp"

namespace tastr {

AdamState AdamState::init(const EmbeddingModel& model, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    s.m = Gradients::zeros_like(model);
    s.v = Gradients::zeros_like(model);
    return s;
}

namespace {

template <class Tensor>
void update_tensor(Tensor& weights, Tensor& m, Tensor& v, const Tensor& g, const AdamConfig& cfg,
                   double bias1, double bias2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    weights.array() -=
        cfg.lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.eps);
}

}  // namespace

void adam_step(AdamState& state, EmbeddingModel& model, const Gradients& grads) {
    if (!grads.shapes_match(model) || !state.m.shapes_match(model)) {
        throw ContractError("adam_step: gradient/state shapes do not match model");
    }
    state.step += 1;
    const double bias1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));

    update_tensor(model.w1, state.m.w1, state.v.w1, grads.w1, state.cfg, bias1, bias2);
    update_tensor(model.b1, state.m.b1, state.v.b1, grads.b1, state.cfg, bias1, bias2);
    if (model.arch == Arch::Mlp) {
        update_tensor(model.w2, state.m.w2, state.v.w2, grads.w2, state.cfg, bias1, bias2);
        update_tensor(model.b2, state.m.b2, state.v.b2, grads.b2, state.cfg, bias1, bias2);
    }
}

}  // namespace tastr
