#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcsim/types.hpp"

namespace mcsim {

/// One append-only trace record. Serialized as CSV with a fixed column
/// order (time,category,subject,object,detail) so golden traces can be
/// compared byte for byte.
struct TraceRecord {
    Tick time = 0;
    std::string category;
    std::string subject;
    std::string object;
    std::string detail;
};

class TraceLog {
public:
    void add(Tick time, std::string category, std::string subject = {},
             std::string object = {}, std::string detail = {}) {
        records_.push_back({time, std::move(category), std::move(subject),
                            std::move(object), std::move(detail)});
    }

    [[nodiscard]] const std::vector<TraceRecord>& records() const { return records_; }
    [[nodiscard]] std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    /// CSV serialization, header included.
    [[nodiscard]] std::string to_csv() const;
    void write_csv(const std::string& path) const;

private:
    std::vector<TraceRecord> records_;
};

}  // namespace mcsim
