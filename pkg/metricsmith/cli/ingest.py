"""
Prediction file ingestion
CSV parsing and lossless writing of prediction sets and fold assignments
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core import (
    ClassificationData,
    FoldAssignment,
    LabelSpace,
    RegressionData,
    TaskType,
    validate_classification,
    validate_regression,
)
from ..errors import DataError, EmptyInput, InvalidLabelSpace, MalformedInput, OutputError
from ..suite import PredictionSet

logger = logging.getLogger(__name__)

SCORE_PREFIX = "score_"
FOLD_COLUMN = "fold"

PathLike = Union[str, Path]

# pandas reports ragged rows by 1-based file line, header included
_RAGGED_ROW = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


@dataclass(frozen=True)
class LoadedPredictions:
    """A parsed prediction file plus its optional pre-split fold column"""
    data: PredictionSet
    folds: Optional[np.ndarray] = None

    def fold_sets(self) -> List[PredictionSet]:
        """Prediction sets per fold id in ascending order; the whole set when no fold column exists"""
        if self.folds is None:
            return [self.data]
        return [self.data.subset(np.flatnonzero(self.folds == f)) for f in np.unique(self.folds)]


def _parser_error(path: PathLike, error: Exception) -> MalformedInput:
    match = _RAGGED_ROW.search(str(error))
    if match is None:
        return MalformedInput(f"Cannot parse {path}: {error}")
    expected, line, seen = (int(g) for g in match.groups())
    row = line - 1
    return MalformedInput(f"{path}: row {row}: expected {expected} fields, saw {seen}", row=row)


def _read_frame(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8")
    except FileNotFoundError as e:
        raise DataError(f"Prediction file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise EmptyInput(f"Prediction file {path} is empty") from e
    except pd.errors.ParserError as e:
        raise _parser_error(path, e) from e
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot read {path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    if frame.empty:
        raise EmptyInput(f"Prediction file {path} has a header but no rows")
    return frame


def _require(frame: pd.DataFrame, column: str, path: PathLike) -> None:
    if column not in frame.columns:
        raise MalformedInput(f"{path}: required column '{column}' is missing", row=0, column=column)


def _numeric_column(frame: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    """Column as float64; the first unparseable or non-finite cell is reported by 1-based data row"""
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argmax(bad)) + 1
        raise MalformedInput(
            f"{path}: row {row}, column '{column}': {raw.iloc[row - 1]!r} is not a finite number",
            row=row,
            column=column,
        )
    return values


def _label_column(frame: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    labels = frame[column].str.strip()
    empty = (labels == "").to_numpy()
    if empty.any():
        row = int(np.argmax(empty)) + 1
        raise MalformedInput(f"{path}: row {row}, column '{column}': empty label", row=row, column=column)
    return labels.to_numpy(dtype=str)


def _fold_column(frame: pd.DataFrame, path: PathLike) -> Optional[np.ndarray]:
    if FOLD_COLUMN not in frame.columns:
        return None
    values = _numeric_column(frame, FOLD_COLUMN, path)
    invalid = (values < 0) | (values != np.floor(values))
    if invalid.any():
        row = int(np.argmax(invalid)) + 1
        raise MalformedInput(
            f"{path}: row {row}, column '{FOLD_COLUMN}': fold ids must be non-negative integers",
            row=row,
            column=FOLD_COLUMN,
        )
    return values.astype(np.int64)


def _parse_classification(
    frame: pd.DataFrame,
    path: PathLike,
    positive_class: Optional[str],
    labels: Optional[LabelSpace] = None,
) -> ClassificationData:
    _require(frame, "y_true", path)
    y_true = _label_column(frame, "y_true", path)
    y_pred = _label_column(frame, "y_pred", path) if "y_pred" in frame.columns else None

    score_columns = [c for c in frame.columns if c.startswith(SCORE_PREFIX)]
    y_score = None
    if labels is not None and positive_class is not None:
        labels = LabelSpace(labels.classes, positive_class)
    if score_columns:
        # score column order defines the class order
        classes = tuple(c[len(SCORE_PREFIX):] for c in score_columns)
        if labels is None:
            labels = LabelSpace(classes, positive_class)
        elif labels.classes != LabelSpace(classes).classes:
            raise InvalidLabelSpace(
                f"{path}: score columns {list(classes)} do not match the label space {list(labels.classes)}"
            )
        y_score = np.column_stack([_numeric_column(frame, c, path) for c in score_columns])
    elif labels is None:
        labels = LabelSpace.infer(y_true, y_pred, positive_class=positive_class)

    return validate_classification(ClassificationData(labels, y_true, y_pred, y_score))


def _parse_regression(frame: pd.DataFrame, path: PathLike) -> RegressionData:
    _require(frame, "y_true", path)
    _require(frame, "y_pred", path)
    return validate_regression(
        RegressionData(_numeric_column(frame, "y_true", path), _numeric_column(frame, "y_pred", path))
    )


def load_predictions(
    path: PathLike,
    task: TaskType,
    positive_class: Optional[str] = None,
    labels: Optional[LabelSpace] = None,
) -> LoadedPredictions:
    """
    Read a prediction CSV

    Classification files carry `y_true`, optionally `y_pred`, and optionally one `score_<class>`
    column per class. Regression files carry `y_true` and `y_pred`. Either may add an integer
    `fold` column for pre-split evaluation.

    Classes are inferred from the observed labels unless `labels` is given, which keeps the
    class order and any classes absent from the file. Score columns must then match it.

    Raises:
        MalformedInput (with 1-based row and column), DataError subclasses from validation
    """
    frame = _read_frame(path)
    if task == TaskType.CLASSIFICATION:
        data = _parse_classification(frame, path, positive_class, labels)
    else:
        data = _parse_regression(frame, path)
    folds = _fold_column(frame, path)
    logger.info(f"Loaded {len(data)} {task.value} rows from {path}")
    return LoadedPredictions(data, folds)


def parse_predictions(
    path: PathLike,
    task: TaskType,
    positive_class: Optional[str] = None,
    labels: Optional[LabelSpace] = None,
) -> PredictionSet:
    return load_predictions(path, task, positive_class, labels).data


def _lossless(values: Sequence[float]) -> List[str]:
    # repr of a Python float round-trips exactly
    return [repr(float(v)) for v in values]


def prediction_frame(data: PredictionSet, folds: Optional[Sequence[int]] = None) -> pd.DataFrame:
    if isinstance(data, ClassificationData):
        columns = {"y_true": data.y_true.tolist()}
        if data.y_pred is not None:
            columns["y_pred"] = data.y_pred.tolist()
        if data.y_score is not None:
            for i, cls in enumerate(data.labels.classes):
                columns[f"{SCORE_PREFIX}{cls}"] = _lossless(data.y_score[:, i])
    else:
        columns = {"y_true": _lossless(data.y_true), "y_pred": _lossless(data.y_pred)}
    if folds is not None:
        columns[FOLD_COLUMN] = [int(f) for f in folds]
    return pd.DataFrame(columns)


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, encoding="utf-8", lineterminator="\n")
    except OSError as e:
        raise OutputError(f"Cannot write {target}: {e}") from e
    logger.debug(f"Wrote {len(frame)} rows to {target}")
    return target


def write_predictions(data: PredictionSet, path: PathLike, folds: Optional[Sequence[int]] = None) -> Path:
    """Write a prediction set in the ingestion layout; floats are written losslessly"""
    return _write_frame(prediction_frame(data, folds), path)


def write_split(assignment: FoldAssignment, path: PathLike) -> Path:
    """Write a fold assignment as `index,fold` rows"""
    frame = pd.DataFrame({"index": np.arange(assignment.n), "fold": np.asarray(assignment.fold_of)})
    return _write_frame(frame, path)


def write_table(rows: Sequence[dict], columns: Tuple[str, ...], path: PathLike) -> Path:
    """Write row dictionaries with a fixed column order; missing values become empty cells"""
    frame = pd.DataFrame([{c: row.get(c) for c in columns} for row in rows], columns=list(columns))
    for column in columns:
        if frame[column].dtype.kind == "f":
            frame[column] = [("" if np.isnan(v) else repr(float(v))) for v in frame[column]]
    return _write_frame(frame, path)
