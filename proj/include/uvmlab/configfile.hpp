#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace uvmlab {

// Line-based `key = value` configuration with dotted section keys, e.g.
//   timing.far_fault_us = 45
// Blank lines and lines starting with '#' are ignored.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_text(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get(const std::string& key, const std::string& def) const;
    uint64_t get_u64(const std::string& key, uint64_t def) const;
    int64_t get_i64(const std::string& key, int64_t def) const;
    double get_f64(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<int64_t> get_i64_list(const std::string& key,
                                      const std::vector<int64_t>& def) const;
    std::vector<uint64_t> get_u64_list(const std::string& key,
                                       const std::vector<uint64_t>& def) const;
    std::vector<std::string> get_str_list(const std::string& key,
                                          const std::vector<std::string>& def) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace uvmlab
