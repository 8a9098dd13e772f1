#pragma once

#include <vector>

#include "wozlab/transcript.hpp"

namespace wozlab {

/// Turns 0-4 -> 1, 5-8 -> 2, 9 and later -> 3. Turn 0 is the wizard's
/// opening message; turns past the configured limit stay in segment 3.
int segment_for_turn(int turn);

/// One label per message, in message order.
std::vector<int> segment(const ConversationTranscript& t);

}  // namespace wozlab
