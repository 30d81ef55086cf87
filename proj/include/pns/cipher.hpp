#pragma once

#include <array>
#include <cstdint>

namespace pns {

// Pointer-encryption key: four 16-bit round keys, drawn from the seeded RNG at
// reset. Architecturally unreadable; never serialized.
struct PtrEncKey {
  std::array<uint16_t, 4> rounds{};
};

// 4-round balanced Feistel on 16-bit halves.
// F(h, k) = ((h ^ k) * 0x9E37 + rotl16(h, 3)) mod 2^16
uint32_t cipher_encrypt(uint32_t v, const PtrEncKey& key);
uint32_t cipher_decrypt(uint32_t v, const PtrEncKey& key);

}  // namespace pns
