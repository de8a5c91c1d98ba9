#pragma once

#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gml/errors.hpp"

namespace gml {

// Site id used for the simulated FedAvg aggregation server in ledger entries.
inline constexpr int kServerId = -1;

enum class PayloadKind {
    GossipModel,
    FedavgUpload,
    FedavgBroadcast,
};

inline const char* payload_kind_name(PayloadKind kind) {
    switch (kind) {
    case PayloadKind::GossipModel: return "gossip";
    case PayloadKind::FedavgUpload: return "upload";
    case PayloadKind::FedavgBroadcast: return "broadcast";
    }
    return "?";
}

inline PayloadKind payload_kind_from_name(const std::string& name) {
    if (name == "gossip") return PayloadKind::GossipModel;
    if (name == "upload") return PayloadKind::FedavgUpload;
    if (name == "broadcast") return PayloadKind::FedavgBroadcast;
    throw FormatError("ledger: unknown payload kind '" + name + "'");
}

struct LedgerEntry {
    int round = 0;
    int from_site = 0;
    int to_site = 0;
    PayloadKind kind = PayloadKind::GossipModel;
    std::size_t scalars = 0;

    bool operator==(const LedgerEntry&) const = default;
};

// Append-only log of model transfers; rounds never decrease and recorded
// entries are never touched again.
class CommunicationLedger {
public:
    void record(int round, int from_site, int to_site, PayloadKind kind, std::size_t scalars) {
        if (!entries_.empty() && round < entries_.back().round) {
            throw InvalidInputError("CommunicationLedger: round numbers must not decrease");
        }
        entries_.push_back({round, from_site, to_site, kind, scalars});
    }

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    std::size_t total_scalars() const {
        std::size_t total = 0;
        for (const auto& e : entries_) total += e.scalars;
        return total;
    }

private:
    std::vector<LedgerEntry> entries_;
};

// Per-round, per-site metric sample; split names the evaluation split used.
struct HistoryRow {
    int round = 0;
    int site = 0;
    std::string split = "validation";
    double dsc = 0.0;
};

inline void write_ledger_csv(const CommunicationLedger& ledger, std::ostream& out) {
    out << "round,from,to,kind,scalars\n";
    for (const auto& e : ledger.entries()) {
        out << e.round << ',' << e.from_site << ',' << e.to_site << ','
            << payload_kind_name(e.kind) << ',' << e.scalars << '\n';
    }
}

inline CommunicationLedger read_ledger_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "round,from,to,kind,scalars") {
        throw FormatError("ledger csv: missing or wrong header");
    }
    CommunicationLedger ledger;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field[5];
        for (int i = 0; i < 5; ++i) {
            if (!std::getline(row, field[i], i < 4 ? ',' : '\n')) {
                throw FormatError("ledger csv: malformed row '" + line + "'");
            }
        }
        try {
            ledger.record(std::stoi(field[0]), std::stoi(field[1]), std::stoi(field[2]),
                          payload_kind_from_name(field[3]),
                          static_cast<std::size_t>(std::stoull(field[4])));
        } catch (const std::invalid_argument&) {
            throw FormatError("ledger csv: malformed row '" + line + "'");
        }
    }
    return ledger;
}

inline void write_history_csv(const std::vector<HistoryRow>& rows, std::ostream& out) {
    out << "round,site,split,dsc\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.dsc);
        out << r.round << ',' << r.site << ',' << r.split << ',' << buf << '\n';
    }
}

} // namespace gml
