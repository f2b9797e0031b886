#pragma once

#include <cstdint>

namespace mtlb {

struct TaskWeights {
    double seg = 1.0;
    double det = 1.0;
};

/// Half-up rounding of a continuous frequency to an integer period.
int64_t round_frequency(double x);

/// Per-epoch task masking: a task participates in epoch t (zero-based) iff
/// t is a multiple of its period, otherwise its weight is forced to zero.
/// Periods of one on both tasks reduce to ordinary joint training.
struct AsyncSchedule {
    int64_t nu_seg = 1;
    int64_t nu_det = 1;

    void validate() const;

    bool seg_active(int64_t epoch) const { return epoch % nu_seg == 0; }
    bool det_active(int64_t epoch) const { return epoch % nu_det == 0; }

    TaskWeights mask(const TaskWeights& base, int64_t epoch) const {
        return {seg_active(epoch) ? base.seg : 0.0, det_active(epoch) ? base.det : 0.0};
    }
};

}  // namespace mtlb
