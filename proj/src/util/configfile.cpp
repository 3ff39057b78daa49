#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uvmlab/configfile.hpp"

namespace uvmlab {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        return std::stoull(v, nullptr, 0);  // base 0: 0x prefixes welcome
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': bad unsigned value '" + v + "'");
    }
}

}  // namespace

ConfigMap ConfigMap::parse_text(const std::string& text) {
    ConfigMap cm;
    std::istringstream is(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected 'key = value'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
        cm.kv_[key] = value;
    }
    return cm;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
}

std::string ConfigMap::get(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

uint64_t ConfigMap::get_u64(const std::string& key, uint64_t def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : to_u64(it->second, key);
}

int64_t ConfigMap::get_i64(const std::string& key, int64_t def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        return std::stoll(it->second, nullptr, 0);
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': bad integer '" + it->second + "'");
    }
}

double ConfigMap::get_f64(const std::string& key, double def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': bad number '" + it->second + "'");
    }
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<std::string> ConfigMap::get_str_list(const std::string& key,
                                                 const std::vector<std::string>& def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    std::vector<std::string> out;
    std::istringstream is(it->second);
    std::string item;
    while (std::getline(is, item, ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<int64_t> ConfigMap::get_i64_list(const std::string& key,
                                             const std::vector<int64_t>& def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    std::vector<int64_t> out;
    for (const auto& s : get_str_list(key, {})) out.push_back(std::stoll(s, nullptr, 0));
    return out;
}

std::vector<uint64_t> ConfigMap::get_u64_list(const std::string& key,
                                              const std::vector<uint64_t>& def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    std::vector<uint64_t> out;
    for (const auto& s : get_str_list(key, {})) out.push_back(to_u64(s, key));
    return out;
}

}  // namespace uvmlab
