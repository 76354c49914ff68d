#ifndef QIM_VERSION_HPP_
#define QIM_VERSION_HPP_

namespace qim {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // QIM_VERSION_HPP_
