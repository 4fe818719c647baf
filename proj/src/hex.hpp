/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of ctsched, a constant-time AES scheduling workbench.
 */

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace ctsched {

std::string to_hex(std::span<const uint8_t> bytes);

// Decodes exactly out.size() bytes; throws std::invalid_argument on bad input.
void from_hex(std::string_view hex, std::span<uint8_t> out);

std::array<uint8_t, 16> block_from_hex(std::string_view hex);

}  // namespace ctsched
