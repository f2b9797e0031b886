#include "mtlb/scheduler.hpp"

#include <cmath>

#include "mtlb/errors.hpp"

namespace mtlb {

int64_t round_frequency(double x) {
    if (!std::isfinite(x)) throw NumericError("round_frequency: non-finite input");
    return static_cast<int64_t>(std::floor(x + 0.5));
}

void AsyncSchedule::validate() const {
    if (nu_seg < 1 || nu_seg > 10 || nu_det < 1 || nu_det > 10)
        throw ConfigError("schedule: task periods must lie in [1, 10]");
}

}  // namespace mtlb
