#ifndef VXR_CONFIG_HPP
#define VXR_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace vxr {

// Flat "key = value" text files; '#' starts a comment. Key order is kept
// for round-trips, hashing uses the sorted canonical form.
class KeyValues {
public:
    static KeyValues parse_string(const std::string& text, const std::string& origin);
    static KeyValues parse_file(const std::string& path);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;

    void set(const std::string& key, const std::string& value);
    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
    std::vector<std::string> keys() const;

    std::string canonical() const;
    std::uint64_t hash() const;

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

std::uint64_t fnv1a_hash(const std::string& s);
std::uint64_t file_hash(const std::string& path);

}  // namespace vxr

#endif
