#include "sempipe/trace.hpp"

namespace sempipe {

double ExecutionTrace::total_usd() const {
    double sum = 0.0;
    for (const TraceEntry& e : entries) sum += e.usd;
    return sum;
}

double ExecutionTrace::total_latency_s() const {
    double sum = 0.0;
    for (const TraceEntry& e : entries) sum += e.latency_s;
    return sum;
}

ExecutionTrace::OpTotals ExecutionTrace::totals_for(const std::string& op_id) const {
    OpTotals t;
    for (const TraceEntry& e : entries) {
        if (e.op_id != op_id) continue;
        t.inputs++;
        t.usd += e.usd;
        t.latency_s += e.latency_s;
        switch (e.outcome) {
            case Outcome::Emitted: t.emitted += e.emitted; break;
            case Outcome::Dropped: t.dropped++; break;
            case Outcome::Error: t.errored++; break;
        }
    }
    return t;
}

}  // namespace sempipe
