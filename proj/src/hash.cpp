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

#include "feedrank/hash.hpp"

#include <sodium.h>

#include <array>
#include <stdexcept>

#include "feedrank/error.hpp"

namespace feedrank {
namespace {

void ensure_sodium() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw Error("internal", "libsodium initialisation failed");
}

template <class Range>
std::string hash_fields(const Range& fields) {
  ensure_sodium();
  crypto_generichash_state state;
  constexpr std::size_t kDigestBytes = 16;
  crypto_generichash_init(&state, nullptr, 0, kDigestBytes);
  for (const auto& field : fields) {
    std::array<unsigned char, 8> len{};
    auto n = static_cast<std::uint64_t>(field.size());
    for (auto& b : len) {
      b = static_cast<unsigned char>(n & 0xff);
      n >>= 8;
    }
    crypto_generichash_update(&state, len.data(), len.size());
    crypto_generichash_update(&state, reinterpret_cast<const unsigned char*>(field.data()),
                              field.size());
  }
  std::array<unsigned char, kDigestBytes> digest{};
  crypto_generichash_final(&state, digest.data(), digest.size());
  std::string hex(kDigestBytes * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), digest.data(), digest.size());
  hex.pop_back();
  return hex;
}

}  // namespace

std::string content_hash128(std::initializer_list<std::string_view> fields) {
  return hash_fields(fields);
}

std::string content_hash128(std::span<const std::string> fields) { return hash_fields(fields); }

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  constexpr int kVariant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), kVariant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), kVariant);
  out.resize(out.size() - 1);
  return out;
}

std::string base64_decode(std::string_view text) {
  ensure_sodium();
  std::string out(text.size() / 4 * 3 + 3, '\0');
  std::size_t written = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(),
                        text.size(), nullptr, &written, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error("parse", "invalid base64 payload");
  }
  out.resize(written);
  return out;
}

}  // namespace feedrank
