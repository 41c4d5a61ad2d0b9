#pragma once

// ASVspoof CM protocol parsing. Each line carries five whitespace-separated
// fields: SPEAKER UTT_ID UNUSED ATTACK_ID KEY, with KEY either "bonafide" or
// "spoof" and ATTACK_ID "-" for bona fide trials.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace antispoof {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Partition { train, dev, eval, unknown };

struct TrialRecord {
  std::string speaker_id;
  std::string utt_id;
  std::string attack_id;  // "-" for bona fide
  bool bonafide = false;
  Partition partition = Partition::unknown;
};

inline std::vector<TrialRecord> parse_protocol(const std::string& path,
                                               Partition partition = Partition::unknown) {
  std::ifstream f(path);
  if (!f) throw ProtocolError("protocol: cannot open " + path);
  std::vector<TrialRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string speaker, utt, unused, attack, key, extra;
    if (!(ss >> speaker >> utt >> unused >> attack >> key))
      throw ProtocolError("protocol: malformed line " + std::to_string(lineno) + " in " + path);
    if (ss >> extra)
      throw ProtocolError("protocol: trailing fields on line " + std::to_string(lineno) + " in " +
                          path);
    TrialRecord r;
    r.speaker_id = speaker;
    r.utt_id = utt;
    r.attack_id = attack;
    r.partition = partition;
    if (key == "bonafide")
      r.bonafide = true;
    else if (key == "spoof")
      r.bonafide = false;
    else
      throw ProtocolError("protocol: bad key '" + key + "' on line " + std::to_string(lineno) +
                          " in " + path);
    if (!seen.insert(r.utt_id).second)
      throw ProtocolError("protocol: duplicate utt_id '" + r.utt_id + "' on line " +
                          std::to_string(lineno) + " in " + path);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::size_t count_bonafide(const std::vector<TrialRecord>& records) {
  std::size_t n = 0;
  for (const auto& r : records) n += r.bonafide ? 1 : 0;
  return n;
}

}  // namespace antispoof
