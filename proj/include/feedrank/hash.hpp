// Copyright 2026 The feedrank Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

namespace feedrank {

/// 128-bit BLAKE2b digest of the given fields, rendered as 32 lowercase hex
/// characters. Fields are length-prefixed so ("ab","c") and ("a","bc") differ.
std::string content_hash128(std::initializer_list<std::string_view> fields);
std::string content_hash128(std::span<const std::string> fields);

/// Seeded 64-bit FNV-1a with a murmur-style finalizer. Used for feature
/// hashing where speed matters more than collision resistance.
inline std::uint64_t fast_hash64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_decode(std::string_view text);

}  // namespace feedrank
