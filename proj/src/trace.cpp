#include "mcsim/trace.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mcsim {

std::string TraceLog::to_csv() const {
    std::ostringstream out;
    out << "time,category,subject,object,detail\n";
    for (const auto& r : records_) {
        out << r.time << ',' << r.category << ',' << r.subject << ','
            << r.object << ',' << r.detail << '\n';
    }
    return out.str();
}

void TraceLog::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open trace file: " + path);
    f << to_csv();
}

}  // namespace mcsim
