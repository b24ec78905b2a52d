// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace tpvocc {

// Worker count used by the data-parallel kernels. Every kernel assigns each
// output element to exactly one worker and keeps a fixed accumulation order,
// so results do not depend on this setting.
void set_num_workers(int n);
int num_workers();

}  // namespace tpvocc
