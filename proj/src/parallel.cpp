// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/parallel.hpp"

#include <omp.h>

namespace tpvocc {

void set_num_workers(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int num_workers() { return omp_get_max_threads(); }

}  // namespace tpvocc
