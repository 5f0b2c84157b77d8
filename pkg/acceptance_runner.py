#!/usr/bin/env python3
"""
Acceptance runner - executes the JSON cases under tests/acceptance

Each case names a check from acceptance_checks and its arguments:

    {"name": "...", "criterion": 1, "check": "exppair_word",
     "arguments": {...}, "time_budget_seconds": 1}
"""
import argparse
import glob
import json
import logging
import os
import sys
import time
import traceback
from typing import Any, Dict, List, Optional

from acceptance_checks import execute_check
from storage.run_records import write_json

logger = logging.getLogger(__name__)

DEFAULT_CASES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "tests", "acceptance")


def load_cases(cases_dir: str = DEFAULT_CASES_DIR) -> List[Dict[str, Any]]:
    cases = []
    for path in sorted(glob.glob(os.path.join(cases_dir, "*.json"))):
        with open(path, "r") as f:
            case = json.load(f)
        case.setdefault("name", os.path.splitext(os.path.basename(path))[0])
        cases.append(case)
    return cases


class AcceptanceRunner:
    def __init__(self, cases_dir: str = DEFAULT_CASES_DIR, threads: int = 1, seed: int = 0):
        self.cases_dir = cases_dir
        self.threads = threads
        self.seed = seed
        self.cases: List[Dict[str, Any]] = []
        self.results: List[Dict[str, Any]] = []

    def load_cases(self, only: Optional[str] = None) -> List[Dict[str, Any]]:
        cases = load_cases(self.cases_dir)
        if only:
            wanted = {name.strip() for name in only.split(",")}
            cases = [c for c in cases if c["name"] in wanted]
        self.cases = cases
        print(f"Loaded {len(cases)} acceptance cases from {self.cases_dir}", file=sys.stderr)
        return cases

    def run_case(self, index: int, case: Dict[str, Any]) -> Dict[str, Any]:
        name = case["name"]
        print(f"\nCase {index}/{len(self.cases)} ({name}): {case.get('description', case['check'])}", file=sys.stderr)
        started = time.perf_counter()
        try:
            outcome = execute_check(case["check"], case.get("arguments", {}), threads=self.threads, seed=self.seed)
        except Exception as e:
            logger.error(f"case {name} raised {e}")
            traceback.print_exc()
            outcome = {"passed": False, "measured": None, "error": f"{type(e).__name__}: {e}"}
        elapsed = time.perf_counter() - started
        budget = case.get("time_budget_seconds")
        result = {
            "case_id": index,
            "case_name": name,
            "criterion": case.get("criterion"),
            "check": case["check"],
            "passed": bool(outcome.get("passed")),
            "measured": outcome.get("measured"),
            "elapsed_seconds": elapsed,
            "over_budget": budget is not None and elapsed > budget,
            "details": outcome,
        }
        print(f"Measured: {result['measured']} ({elapsed:.2f}s) - {'PASS' if result['passed'] else 'FAIL'}", file=sys.stderr)
        return result

    def run_all(self) -> List[Dict[str, Any]]:
        self.results = [self.run_case(i, case) for i, case in enumerate(self.cases, 1)]
        return self.results

    def all_passed(self) -> bool:
        return bool(self.results) and all(r["passed"] for r in self.results)

    def print_summary(self) -> None:
        total = len(self.results)
        passed = sum(1 for r in self.results if r["passed"])
        failed = total - passed
        out = sys.stderr
        print(f"\n{'=' * 50}", file=out)
        print("ACCEPTANCE SUMMARY", file=out)
        print(f"{'=' * 50}", file=out)
        print(f"Total Cases: {total}", file=out)
        print(f"Passed: {passed}", file=out)
        print(f"Failed: {failed}", file=out)
        if total:
            print(f"Pass Rate: {passed / total * 100:.1f}%", file=out)
        slow = [r for r in self.results if r["over_budget"]]
        if slow:
            print(f"Over time budget: {', '.join(r['case_name'] for r in slow)}", file=out)
        if failed > 0:
            print("\nFAILED CASES:", file=out)
            for r in self.results:
                if not r["passed"]:
                    print(f"- Case {r['case_id']} ({r['case_name']}): measured {r['measured']}", file=out)

    def save_results(self, output_file: str = "acceptance_results.json") -> str:
        write_json(output_file, self.results)
        print(f"\nDetailed results saved to: {output_file}", file=sys.stderr)
        return output_file


def parse_args(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(description="fiveprime acceptance runner")
    parser.add_argument("--cases", default=DEFAULT_CASES_DIR, help="Directory containing case JSON files")
    parser.add_argument("--only", help="Comma-separated case names")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default="acceptance_results.json")
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    print("fiveprime acceptance runner", file=sys.stderr)
    print("=" * 50, file=sys.stderr)
    runner = AcceptanceRunner(args.cases, threads=args.threads, seed=args.seed)
    runner.load_cases(only=args.only)
    runner.run_all()
    runner.print_summary()
    runner.save_results(args.output)
    return 0 if runner.all_passed() else 1


if __name__ == "__main__":
    sys.exit(main())
