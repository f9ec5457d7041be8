#pragma once

// Repo-owned prompt templates. The checked-in text assets under assets/ hold
// the same bytes; a unit test keeps them in sync.

namespace regtsc {

inline constexpr const char *kReviewerPromptTemplate =
    "[Role]\n"
    "You are a traffic engineering reviewer. You distill historical emergency "
    "signal-control cases into reusable guidance.\n"
    "\n"
    "[Task]\n"
    "For each case below, analyze the expert's control strategy and its causal effect on "
    "the emergency vehicle and the queues. Summarize the distilled knowledge as guidance "
    "entries, each stating the situation in which it applies, the recommended action, and "
    "the intended effect.\n"
    "\n"
    "[Cases]\n"
    "{{CASES}}"
    "\n"
    "[Output Format]\n"
    "Reply with one <guidance> block per guidance entry:\n"
    "<guidance>\n"
    "<situation>INSERT_SITUATION_HERE</situation>\n"
    "<action>INSERT_ACTION_HERE</action>\n"
    "<effect>INSERT_EFFECT_HERE</effect>\n"
    "</guidance>\n";

inline constexpr const char *kQueryPromptTemplate =
    "[Role]\n"
    "You are a query generator for an emergency traffic-guidance retrieval system.\n"
    "\n"
    "[Context]\n"
    "{{CONTEXT}}"
    "\n"
    "[Task]\n"
    "Write one concise retrieval query that highlights the key features of this emergency "
    "situation. Reply with the query text only.\n";

} // namespace regtsc
