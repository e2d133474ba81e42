#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "longform/common.hpp"
#include "longform/model.hpp"

namespace longform {

// Linear warmup from init_lr to peak_lr over warmup_steps, then cosine decay
// to zero at total_steps.
struct Schedule {
    double init_lr = 1e-4;
    double peak_lr = 2e-3;
    long warmup_steps = 1;
    long total_steps = 1;
};

inline void validate_schedule(const Schedule& s) {
    check_config(s.init_lr >= 0.0 && s.init_lr <= s.peak_lr,
                 "schedule: need 0 <= init_lr <= peak_lr");
    check_config(s.warmup_steps >= 1, "schedule: warmup_steps must be >= 1");
    check_config(s.warmup_steps <= s.total_steps, "schedule: warmup_steps exceeds total_steps");
}

inline double lr_at(const Schedule& s, long step) {
    check_config(step >= 0 && step < s.total_steps,
                 "lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(s.total_steps) + ")");
    if (step <= s.warmup_steps) {
        const double t = static_cast<double>(step) / static_cast<double>(s.warmup_steps);
        return s.init_lr + (s.peak_lr - s.init_lr) * t;
    }
    const double progress = static_cast<double>(step - s.warmup_steps) /
                            static_cast<double>(s.total_steps - s.warmup_steps);
    return s.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline AdamState make_adam_state(std::size_t total_params) {
    AdamState s;
    s.first_moment.assign(total_params, 0.0);
    s.second_moment.assign(total_params, 0.0);
    return s;
}

// One bias-corrected Adam step over the flattened parameter blocks, with the
// learning rate taken from the schedule at the current step count.
inline void adam_step(std::vector<ParamBlock>& params, const std::vector<ConstParamBlock>& grads,
                      AdamState& state, const Schedule& schedule) {
    check_shape(params.size() == grads.size(), "adam_step: block counts differ");
    std::size_t total = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        check_shape(params[i].size == grads[i].size, "adam_step: block sizes differ");
        total += params[i].size;
    }
    check_shape(total == state.first_moment.size(), "adam_step: state size does not match params");

    const double lr = lr_at(schedule, state.step_count);
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].data;
        const double* g = grads[i].data;
        double* m = state.first_moment.data() + offset;
        double* v = state.second_moment.data() + offset;
        for (std::size_t j = 0; j < params[i].size; ++j) {
            if (!std::isfinite(g[j])) throw ShapeError("adam_step: non-finite gradient");
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
        offset += params[i].size;
    }
}

}  // namespace longform
