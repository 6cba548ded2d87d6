#include "config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace vxr {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    VXR_CHECK_DATA(is.good(), "cannot open " << path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return fnv1a_hash(buf.str());
}

KeyValues KeyValues::parse_string(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        VXR_CHECK_USAGE(eq != std::string::npos, origin << ":" << lineno << ": expected 'key = value', got '"
                                                        << line << "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        VXR_CHECK_USAGE(!key.empty(), origin << ":" << lineno << ": empty key");
        kv.set(key, value);
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
    std::ifstream is(path);
    VXR_CHECK_USAGE(is.good(), "cannot open config file " << path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str(), path);
}

bool KeyValues::has(const std::string& key) const {
    for (const auto& [k, v] : items_) {
        if (k == key) return true;
    }
    return false;
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : items_) {
        if (k == key) return v;
    }
    return fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    VXR_CHECK_USAGE(used == v.size(), "config key '" << key << "' has a malformed numeric value '" << v << "'");
    return out;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    VXR_CHECK_USAGE(used == v.size(), "config key '" << key << "' has a malformed integer value '" << v << "'");
    return out;
}

void KeyValues::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : items_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    items_.emplace_back(key, value);
}

std::vector<std::string> KeyValues::keys() const {
    std::vector<std::string> out;
    out.reserve(items_.size());
    for (const auto& [k, v] : items_) out.push_back(k);
    return out;
}

std::string KeyValues::canonical() const {
    auto sorted = items_;
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (const auto& [k, v] : sorted) {
        out += k;
        out += "=";
        out += v;
        out += "\n";
    }
    return out;
}

std::uint64_t KeyValues::hash() const { return fnv1a_hash(canonical()); }

}  // namespace vxr
