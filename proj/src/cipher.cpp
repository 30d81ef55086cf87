#include "pns/cipher.hpp"

namespace pns {

namespace {

uint16_t rotl16(uint16_t x, unsigned r) {
  return static_cast<uint16_t>((x << r) | (x >> (16 - r)));
}

uint16_t round_fn(uint16_t h, uint16_t k) {
  return static_cast<uint16_t>(static_cast<uint16_t>((h ^ k) * 0x9E37u) + rotl16(h, 3));
}

}  // namespace

uint32_t cipher_encrypt(uint32_t v, const PtrEncKey& key) {
  uint16_t left = static_cast<uint16_t>(v >> 16);
  uint16_t right = static_cast<uint16_t>(v);
  for (int i = 0; i < 4; ++i) {
    uint16_t next_right = left ^ round_fn(right, key.rounds[i]);
    left = right;
    right = next_right;
  }
  return (static_cast<uint32_t>(left) << 16) | right;
}

uint32_t cipher_decrypt(uint32_t v, const PtrEncKey& key) {
  uint16_t left = static_cast<uint16_t>(v >> 16);
  uint16_t right = static_cast<uint16_t>(v);
  for (int i = 3; i >= 0; --i) {
    uint16_t prev_left = right ^ round_fn(left, key.rounds[i]);
    right = left;
    left = prev_left;
  }
  return (static_cast<uint32_t>(left) << 16) | right;
}

}  // namespace pns
