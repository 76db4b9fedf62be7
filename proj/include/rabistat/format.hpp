#pragma once

#include <string>

namespace rabistat {

// 12 significant digits, shortest of fixed/scientific ("%.12g"). Every CSV
// and JSON number written by the tools goes through here.
std::string format_number(double value);

}  // namespace rabistat
