// SPDX-License-Identifier: Apache-2.0
//
// Compile-failure probe: session tokens are move-only, so this translation
// unit must be rejected.  The build of this target is registered as a test
// that is expected to fail.

#include "stcp/session.hpp"
#include "stcp/session_text.hpp"

stcp::SessionToken duplicate_token(const stcp::SessionToken& token) {
  return stcp::SessionToken(token);  // copy construction: must not compile
}

int main() {
  stcp::SessionToken t = stcp::new_session(stcp::parse_shape("end"));
  stcp::SessionToken u = duplicate_token(t);
  (void)u;
  return 0;
}
