#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <mutex>

namespace ctrllab {

using HP = boost::multiprecision::mpfr_float;

struct PrecisionContext {
    int working_bits = 53;
    int quad_panels_per_period = 8;
    int n_max = 64;
    double tail_tolerance = 1e-12;

    void validate() const;
};

// MPFR default precision is process wide; this guard serializes every
// high-precision section and restores the previous setting on exit.
class ScopedBits {
public:
    explicit ScopedBits(int bits);
    ~ScopedBits();
    ScopedBits(const ScopedBits&) = delete;
    ScopedBits& operator=(const ScopedBits&) = delete;

    int bits() const { return bits_; }

private:
    std::unique_lock<std::recursive_mutex> lock_;
    unsigned saved_digits10_;
    int bits_;
};

unsigned digits10_for_bits(int bits);

// Copies keep their source precision; rebase onto the current default.
inline HP at_current(const HP& x) { return HP(x, HP::default_precision()); }

inline double to_double(const HP& x) { return x.convert_to<double>(); }

HP hp_pi();

} // namespace ctrllab
