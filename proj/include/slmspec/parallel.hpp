#pragma once

namespace slmspec::parallel {

/// Caps the OpenMP worker count for all kernels. n < 1 restores the runtime default.
void set_threads(int n);
int threads();

/// Applies SLMSPEC_THREADS when set; returns the effective count.
int configure_from_env();

}  // namespace slmspec::parallel
