#pragma once

namespace spectralium::embedded {

// Text of data/cie1931_2deg_5nm.cmf and data/d65_5nm.spd.
extern const char* const cie1931_cmf;
extern const char* const d65_spd;

}  // namespace spectralium::embedded
