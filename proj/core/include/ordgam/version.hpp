#pragma once

namespace ordgam {

inline constexpr const char* kVersion = "0.1.0";

}
