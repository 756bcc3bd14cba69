#pragma once

namespace cgff {

/// `git describe` of the source tree at configure time.
const char* build_tag() noexcept;

}  // namespace cgff
