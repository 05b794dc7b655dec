"""Metrics, charts and report files."""

from .charts import render_bar_chart, render_confusion_heatmap
from .classification import ConfusionMatrix, MetricsBundle, classification_metrics, confusion_matrix, metrics
from .writer import (
    held_out_analysis,
    read_json,
    write_confusion_csv,
    write_json,
    write_predictions_csv,
    write_report,
)
