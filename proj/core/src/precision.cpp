#include "ctrllab/precision.hpp"

#include "ctrllab/errors.hpp"

#include <cmath>
#include <string>

namespace ctrllab {

void PrecisionContext::validate() const {
    if (working_bits < 53)
        throw InputError("working_bits must be at least 53, got " + std::to_string(working_bits));
    if (quad_panels_per_period < 4)
        throw InputError("quad_panels_per_period must be at least 4, got " +
                         std::to_string(quad_panels_per_period));
    if (n_max < 1) throw InputError("series cutoff N_max must be positive");
    if (!(tail_tolerance > 0.0) || !std::isfinite(tail_tolerance))
        throw InputError("tail_tolerance must be positive");
}

namespace {
std::recursive_mutex& hp_mutex() {
    static std::recursive_mutex m;
    return m;
}
} // namespace

unsigned digits10_for_bits(int bits) {
    return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
}

ScopedBits::ScopedBits(int bits)
    : lock_(hp_mutex()), saved_digits10_(HP::default_precision()), bits_(bits) {
    HP::default_precision(digits10_for_bits(bits));
}

ScopedBits::~ScopedBits() { HP::default_precision(saved_digits10_); }

HP hp_pi() {
    HP r;
    mpfr_const_pi(r.backend().data(), MPFR_RNDN);
    return r;
}

} // namespace ctrllab
