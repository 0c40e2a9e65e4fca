#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace comment_judge {

/// 64-bit FNV-1a. Stable across platforms, used for fingerprints and digests.
class Fnv1a {
 public:
  constexpr void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }

  // Field separator that cannot be confused with text content.
  constexpr void separator() noexcept { update(std::string_view("\x1f", 1)); }

  [[nodiscard]] constexpr std::uint64_t value() const noexcept { return state_; }

  [[nodiscard]] std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string digest_hex(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

}  // namespace comment_judge
