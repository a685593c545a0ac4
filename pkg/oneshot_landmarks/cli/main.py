"""
Main CLI entry point for Oneshot Landmarks.
"""
import click

from oneshot_landmarks.cli.ablate import ablate
from oneshot_landmarks.cli.detect import detect
from oneshot_landmarks.cli.evaluate import evaluate
from oneshot_landmarks.cli.synth import synth
from oneshot_landmarks.cli.train import train


@click.group()
def cli():
    """Oneshot Landmarks CLI tools."""
    pass


# Add subcommands
cli.add_command(train)
cli.add_command(detect)
cli.add_command(evaluate)
cli.add_command(ablate)
cli.add_command(synth)


if __name__ == "__main__":
    cli()
