#include "wozlab/segments.hpp"

#include "wozlab/error.hpp"

namespace wozlab {

int segment_for_turn(int turn) {
  if (turn < 0) throw ValidationError("negative turn index " + std::to_string(turn));
  if (turn <= 4) return 1;
  if (turn <= 8) return 2;
  return 3;
}

std::vector<int> segment(const ConversationTranscript& t) {
  std::vector<int> out;
  out.reserve(t.messages.size());
  for (const auto& m : t.messages) out.push_back(segment_for_turn(m.turn_index));
  return out;
}

}  // namespace wozlab
