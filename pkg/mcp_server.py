#!/usr/bin/env python3
"""
NESS current-bounds MCP server.

Exposes the steady-state solvers, the current bounds, the experiment runner
and the ribbon densities as MCP tools over stdio. ``handle_request`` is the
transport-free dispatcher the stdio handlers call; tests and scripts can use
it directly.
"""

import asyncio
import json
import logging
import time
from typing import Any, Dict, List, Optional

from mcp.server import NotificationOptions, Server
from mcp.server.models import InitializationOptions
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from experiments import RunConfig, run_experiment, single_system_report
from linalg_core import validate_psd
from ness_boson import current_lower_bound_boson
from ness_config import Settings, load_settings
from ness_errors import ConfigError, NessError
from ness_fermion import Statistics, current_bound_fermion
from ribbon import current_density, ribbon_from_dict
from utils import decode_matrix, to_jsonable

logger = logging.getLogger(__name__)

SERVER_NAME = "ness-bounds"
SERVER_VERSION = "1.0.0"

MATRIX_SCHEMA = {
    "description": "Matrix as nested real lists or {\"re\": [[...]], \"im\": [[...]]}",
    "oneOf": [{"type": "array"}, {"type": "object"}],
}

TOOLS = [
    Tool(
        name="solve_system",
        description="Steady-state covariance, current and bound for one system, with optional transient samples",
        inputSchema={
            "type": "object",
            "properties": {
                "system": {
                    "type": "object",
                    "description": "H, A, D matrices, statistics ('fermion' or 'boson'), optional Q0 and times",
                },
            },
            "required": ["system"],
        },
    ),
    Tool(
        name="current_bounds",
        description="Fermionic upper bound J_max or bosonic lower bound J_min from the rate matrices alone",
        inputSchema={
            "type": "object",
            "properties": {
                "A": MATRIX_SCHEMA,
                "D": MATRIX_SCHEMA,
                "statistics": {"type": "string", "enum": ["fermion", "boson"], "default": "fermion"},
            },
            "required": ["A", "D"],
        },
    ),
    Tool(
        name="run_experiment",
        description="Run a seeded experiment from a run config and return its summary",
        inputSchema={
            "type": "object",
            "properties": {
                "config": {"type": "object", "description": "Run config (same schema as the JSON files)"},
                "jobs": {"type": "integer", "minimum": 1, "description": "Worker processes"},
                "include_rows": {"type": "boolean", "default": False},
            },
            "required": ["config"],
        },
    ),
    Tool(
        name="ribbon_density",
        description="Current density, its bound and the particle density of a shift-invariant ribbon",
        inputSchema={
            "type": "object",
            "properties": {
                "ribbon": {"type": "object", "description": "Ribbon spec: d, n_k and hopping lists"},
            },
            "required": ["ribbon"],
        },
    ),
]


class NessMCPServer:
    """MCP server for the NESS current-bounds library"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or load_settings()
        self.server = Server(SERVER_NAME)
        self._register_handlers()
        logger.info("NessMCPServer initialized")

    def _register_handlers(self):
        @self.server.list_tools()
        async def handle_list_tools() -> List[Tool]:
            return TOOLS

        @self.server.call_tool()
        async def handle_call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
            response = await self.handle_request({"tool": name, "parameters": arguments or {}})
            return [TextContent(type="text", text=json.dumps(response, indent=2))]

    async def solve_system(self, system: Dict[str, Any]) -> Dict[str, Any]:
        report, violations = await asyncio.to_thread(
            single_system_report, system, self.settings.tolerances
        )
        return {**report, "violations": list(violations)}

    async def current_bounds(self, A: Any, D: Any, statistics: str = "fermion") -> Dict[str, Any]:
        tol = self.settings.tolerances
        a = validate_psd(decode_matrix(A, "A"), "A", tol)
        d = validate_psd(decode_matrix(D, "D"), "D", tol)
        result = {"statistics": statistics, "tr_A": a.trace, "tr_D": d.trace}
        if Statistics(statistics) is Statistics.FERMION:
            result["J_max"] = current_bound_fermion(a, d)
        else:
            result["J_min"] = current_lower_bound_boson(a, d)
        return result

    async def run_experiment(self, config: Dict[str, Any], jobs: Optional[int] = None,
                             include_rows: bool = False) -> Dict[str, Any]:
        run_config = RunConfig.from_dict(config, self.settings.tolerances)
        result = await run_experiment(
            run_config,
            jobs=jobs or self.settings.jobs,
            failure_rate_threshold=self.settings.failure_rate_threshold,
        )
        payload = {"exit_code": result.exit_code, "summary": result.summary}
        if result.report is not None:
            payload["report"] = result.report
        if include_rows:
            payload["header"] = result.header
            payload["rows"] = result.rows
        return payload

    async def ribbon_density(self, ribbon: Dict[str, Any]) -> Dict[str, Any]:
        spec = ribbon_from_dict(ribbon)
        report = await asyncio.to_thread(current_density, spec, self.settings.tolerances)
        return {"d": spec.d, **report.to_dict()}

    async def handle_request(self, request: Dict[str, Any]) -> Dict[str, Any]:
        """Dispatch {"tool", "parameters"} and wrap the outcome as a status payload."""
        tool = request.get("tool")
        params = request.get("parameters") or {}
        handlers = {
            "solve_system": self.solve_system,
            "current_bounds": self.current_bounds,
            "run_experiment": self.run_experiment,
            "ribbon_density": self.ribbon_density,
        }
        start_time = time.perf_counter()
        try:
            handler = handlers.get(tool)
            if handler is None:
                raise ConfigError(f"Unknown tool: {tool}")
            result = await handler(**params)
            elapsed_ms = (time.perf_counter() - start_time) * 1000
            logger.info(f"Tool {tool} finished in {elapsed_ms:.1f} ms")
            return {"status": "success", "result": to_jsonable(result)}
        except NessError as e:
            logger.warning(f"Tool {tool} failed ({e.reason}): {e}")
            return {"status": "error", "reason": e.reason, "error": str(e)}
        except (TypeError, ValueError) as e:
            logger.warning(f"Tool {tool} rejected its parameters: {e}")
            return {"status": "error", "reason": "invalid_parameters", "error": str(e)}


async def main():
    """Main entry point for the MCP server"""
    settings = load_settings()
    logging.basicConfig(level=getattr(logging, settings.log_level, logging.WARNING))
    mcp_server = NessMCPServer(settings)

    logger.info("Waiting for stdio connection...")
    async with stdio_server() as (read_stream, write_stream):
        await mcp_server.server.run(
            read_stream,
            write_stream,
            InitializationOptions(
                server_name=SERVER_NAME,
                server_version=SERVER_VERSION,
                capabilities=mcp_server.server.get_capabilities(
                    notification_options=NotificationOptions(),
                    experimental_capabilities={},
                ),
            ),
        )


def run():
    asyncio.run(main())


if __name__ == "__main__":
    run()
