#pragma once

#include <cstdio>
#include <sstream>
#include <string>

namespace tetrasim::csv {

inline constexpr const char* kSchemaVersion = "1";

/// Floats serialize with 9 significant digits so identical runs produce
/// byte-identical files.
inline std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

class Row {
public:
    Row& add(const std::string& v) {
        if (!first_) os_ << ',';
        first_ = false;
        os_ << v;
        return *this;
    }
    Row& add(double v) { return add(g9(v)); }
    Row& add(std::uint64_t v) { return add(std::to_string(v)); }
    Row& add(std::int64_t v) { return add(std::to_string(v)); }
    Row& add(int v) { return add(std::to_string(v)); }
    Row& add(bool v) { return add(std::string(v ? "1" : "0")); }

    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
    bool first_ = true;
};

} // namespace tetrasim::csv
