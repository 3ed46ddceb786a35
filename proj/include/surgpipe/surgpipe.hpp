/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include "surgpipe/calib.hpp"
#include "surgpipe/cam2box.hpp"
#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"
#include "surgpipe/io.hpp"
#include "surgpipe/metrics.hpp"
#include "surgpipe/synth.hpp"
#include "surgpipe/trackfuse.hpp"
