#pragma once

#include <functional>
#include <string>
#include <utility>

namespace caeloc {

// Process-wide progress sink. Long-running commands push one line per
// event (epoch finished, sweep step done); by default the lines go
// nowhere. Not synchronized -- set it before starting work.
using LogSink = std::function<void(const std::string&)>;

inline LogSink& log_sink() {
    static LogSink sink;
    return sink;
}

inline void set_log_sink(LogSink sink) { log_sink() = std::move(sink); }

inline void log_line(const std::string& line) {
    if (log_sink()) log_sink()(line);
}

} // namespace caeloc
