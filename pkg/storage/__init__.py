"""On-disk formats: the binary prime table cache and run output files."""
from storage.run_records import RunRecorder
from storage.table_store import TableStore

__all__ = ["RunRecorder", "TableStore"]
