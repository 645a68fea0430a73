#pragma once

#include <string>

#include "physr/grid.hpp"

namespace physr {

// Self-describing binary container for a FieldSequence.
//
// Layout (all integers and floats little-endian):
//   magic   8 bytes "PHYSRFLD"
//   version u8  (currently 1)
//   m       u8  spatial dimensionality
//   frames  u32
//   chans   u16
//   sizes   u32[m]
//   dt      f64
//   spacing f64[m]
//   origin  f64[m]
//   labels  chans × (u16 length + bytes)
//   payload f32[frames · chans · prod(sizes)] in [time, channel, space...] C-order
//
// Round trips are bit-exact. Loading rejects wrong magic/version, truncated
// files, and non-finite payloads with messages naming the offending field.
void save_field(const FieldSequence& seq, const std::string& path);
FieldSequence load_field(const std::string& path);

} // namespace physr
