#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "uvmlab/trace.hpp"

namespace uvmlab {

namespace {

constexpr const char* kHeader = "cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit";

uint64_t parse_dec(const std::string& field, size_t line, const char* what) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v, 10);
    if (ec != std::errc() || p != field.data() + field.size() || field.empty())
        throw TraceParseError(line, std::string("bad decimal field '") + field + "' for " + what);
    return v;
}

uint64_t parse_hex(const std::string& field, size_t line, const char* what) {
    if (field.size() < 3 || field[0] != '0' || (field[1] != 'x' && field[1] != 'X'))
        throw TraceParseError(line, std::string("expected 0x-prefixed hex for ") + what +
                                        ", got '" + field + "'");
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(field.data() + 2, field.data() + field.size(), v, 16);
    if (ec != std::errc() || p != field.data() + field.size())
        throw TraceParseError(line, std::string("bad hex field '") + field + "' for " + what);
    return v;
}

}  // namespace

std::vector<AccessRecord> ingest(std::istream& in) {
    std::string line;
    size_t line_no = 0;
    if (!std::getline(in, line)) return {};
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw TraceParseError(1, std::string("bad header, expected '") + kHeader + "'");

    std::vector<AccessRecord> out;
    uint64_t prev_cycle = 0;
    bool have_prev = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::string fields[9];
        size_t n_fields = 0, start = 0;
        for (size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (n_fields >= 9)
                    throw TraceParseError(line_no, "too many fields");
                fields[n_fields++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (n_fields != 9)
            throw TraceParseError(line_no, "expected 9 fields, got " + std::to_string(n_fields));

        AccessRecord r;
        r.cycle = parse_dec(fields[0], line_no, "cycle");
        r.pc = parse_hex(fields[1], line_no, "pc");
        r.sm_id = static_cast<uint32_t>(parse_dec(fields[2], line_no, "sm"));
        r.tpc_id = static_cast<uint32_t>(parse_dec(fields[3], line_no, "tpc"));
        r.cta_id = static_cast<uint32_t>(parse_dec(fields[4], line_no, "cta"));
        r.warp_id = static_cast<uint32_t>(parse_dec(fields[5], line_no, "warp"));
        r.vaddr = parse_hex(fields[6], line_no, "vaddr");
        r.alloc_base = parse_hex(fields[7], line_no, "alloc_base");
        if (fields[8] == "0")
            r.hit = false;
        else if (fields[8] == "1")
            r.hit = true;
        else
            throw TraceParseError(line_no, "hit must be 0 or 1, got '" + fields[8] + "'");

        if (r.vaddr < r.alloc_base)
            throw TraceParseError(line_no, "vaddr below alloc_base");
        if (have_prev && r.cycle < prev_cycle)
            throw TraceParseError(line_no, "cycle decreased (" + std::to_string(r.cycle) +
                                               " < " + std::to_string(prev_cycle) + ")");
        prev_cycle = r.cycle;
        have_prev = true;
        out.push_back(r);
    }
    return out;
}

std::vector<AccessRecord> ingest_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open trace file: " + path);
    return ingest(f);
}

void write_trace_csv(std::ostream& out, const std::vector<AccessRecord>& records) {
    out << kHeader << '\n';
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%llu,0x%llx,%u,%u,%u,%u,0x%llx,0x%llx,%d\n",
                      static_cast<unsigned long long>(r.cycle),
                      static_cast<unsigned long long>(r.pc), r.sm_id, r.tpc_id, r.cta_id,
                      r.warp_id, static_cast<unsigned long long>(r.vaddr),
                      static_cast<unsigned long long>(r.alloc_base), r.hit ? 1 : 0);
        out << buf;
    }
}

void write_trace_file(const std::string& path, const std::vector<AccessRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write trace file: " + path);
    write_trace_csv(f, records);
}

}  // namespace uvmlab
