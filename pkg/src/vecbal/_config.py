import os

# Extra runtime assertions (REDUCE bound, support bookkeeping).  The test
# suite switches this on; it costs an O(N log N) sort per REDUCE call.
CHECK_INVARIANTS = os.environ.get("VECBAL_CHECK", "0").strip().lower() in ("1", "true", "yes", "on")
