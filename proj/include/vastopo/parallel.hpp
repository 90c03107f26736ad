#pragma once

namespace vastopo {

// Which flavour of a data-parallel kernel to run. Serial kernels are kept as
// the reference the OpenMP ones are tested and benchmarked against; both
// produce bitwise-identical results.
enum class Exec { Serial, Parallel };

// Caps OpenMP worker count; n < 1 leaves the runtime default. No-op without
// OpenMP.
void set_thread_count(int n);
int thread_count();

}  // namespace vastopo
