import asyncio
import sys
import os

# Ensure repository root is on sys.path for local imports
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from mcp_server import NessMCPServer


async def run():
    server = NessMCPServer()

    # Bound for a two-mode system given by its rate matrices
    req = {"tool": "current_bounds", "parameters": {"A": [[1.0, 0.0], [0.0, 0.5]], "D": [[0.2, 0.0], [0.0, 2.0]]}}
    res = await server.handle_request(req)
    print("current_bounds ->", res)

    # Full steady state of the same system with a hopping term
    system = {"H": [[0.0, 1.0], [1.0, 0.0]], "A": [[1.0, 0.0], [0.0, 0.5]], "D": [[0.2, 0.0], [0.0, 2.0]]}
    res2 = await server.handle_request({"tool": "solve_system", "parameters": {"system": system}})
    result = res2.get("result", {})
    print("solve_system ->", res2["status"], {k: result.get(k) for k in ("J", "J_max", "ratio")})


if __name__ == "__main__":
    asyncio.run(run())
