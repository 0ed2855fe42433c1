// SPDX-License-Identifier: Apache-2.0
//
// kran - knowledge-supported radio access network control
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef KRAN_KRAN_HPP
#define KRAN_KRAN_HPP

#include "kran/core.hpp"
#include "kran/engine.hpp"
#include "kran/ka.hpp"
#include "kran/metrics.hpp"
#include "kran/ran.hpp"
#include "kran/raytrace.hpp"
#include "kran/scenario.hpp"
#include "kran/scene.hpp"
#include "kran/sensors.hpp"

#endif // KRAN_KRAN_HPP
