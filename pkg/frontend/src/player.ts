/**
 * Player board: visible challenges grouped by category, flag submission
 * with immediate verdicts, hint display with cost confirmation, anonymized
 * scoreboard and a post-solve feedback prompt. Everything refreshes through
 * a single coalesced poll of the documented endpoints.
 */

import { ApiClient, ApiError, type ChallengeSummary } from './api.js';
import { startPolling, type Poller } from './poll.js';
import { groupByCategory, hintConfirmation, progressLabel } from './state.js';

const POLL_MS = 4000;

export class PlayerBoard {
  private challenges: ChallengeSummary[] = [];
  private poller: Poller | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    try {
      const info = await this.api.login();
      this.renderHeader(info.game.title, info.alias);
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.renderLoginScreen();
        return;
      }
      throw err;
    }
    this.poller = startPolling(() => this.refresh(), POLL_MS, (err) => this.banner(String(err)));
  }

  stop(): void {
    this.poller?.stop();
  }

  private async refresh(): Promise<void> {
    const [listing, board, offers] = await Promise.all([
      this.api.listChallenges(),
      this.api.scoreboard(),
      this.api.pendingOffers(),
    ]);
    this.challenges = listing.challenges;

    this.section('progress').textContent = progressLabel(listing.progress);

    const grid = this.section('challenges');
    grid.replaceChildren();
    for (const group of groupByCategory(this.challenges)) {
      const heading = document.createElement('h2');
      heading.textContent = group.category;
      grid.appendChild(heading);
      for (const c of group.challenges) {
        grid.appendChild(this.challengeCard(c));
      }
    }

    const rows = board.entries.map(
      (e) => `<tr><td>${e.rank}</td><td>${e.alias}</td><td>${e.score}</td></tr>`,
    );
    this.section('scoreboard').innerHTML =
      `<table><tr><th>#</th><th>Team</th><th>Score</th></tr>${rows.join('')}</table>`;

    const offerBox = this.section('offers');
    offerBox.replaceChildren();
    for (const offer of offers.offers) {
      const note = document.createElement('p');
      note.textContent = `Stuck on ${offer.challenge_id}? A hint is available.`;
      const show = document.createElement('button');
      show.textContent = 'Show hint';
      show.onclick = () => void this.showHint(offer.hint_id, 0);
      note.appendChild(show);
      offerBox.appendChild(note);
    }
  }

  private challengeCard(c: ChallengeSummary): HTMLElement {
    const card = document.createElement('div');
    card.className = c.solved ? 'challenge solved' : 'challenge';
    card.innerHTML = `<h3>${c.title} · ${c.points} pts</h3>`;

    for (const h of c.hints) {
      const hint = document.createElement('button');
      hint.textContent = h.displayed
        ? `Hint: ${h.topic_label} (shown)`
        : `Hint: ${h.topic_label} (${h.cost} pts)`;
      hint.onclick = () => void this.showHint(h.hint_id, h.cost, h.topic_label);
      card.appendChild(hint);
    }

    if (!c.solved) {
      const field = document.createElement('input');
      field.placeholder = 'FLAG{...}';
      const submit = document.createElement('button');
      submit.textContent = 'Submit';
      const verdict = document.createElement('span');
      submit.onclick = async () => {
        const result = await this.api.submitFlag(c.challenge_id, field.value);
        if (result.verdict === 'correct') {
          verdict.textContent = `Correct! +${result.points}`;
          await this.promptFeedback(c.challenge_id);
          await this.poller?.kick();
        } else if (result.verdict === 'rejected_closed') {
          this.banner('The game is closed.');
        } else {
          verdict.textContent = 'Incorrect — try again, no penalty.';
        }
      };
      card.append(field, submit, verdict);
    }
    return card;
  }

  private async showHint(hintId: string, cost: number, topic = ''): Promise<void> {
    const question = hintConfirmation({ cost, topic_label: topic });
    if (question !== null && !window.confirm(question)) return;
    const hint = await this.api.displayHint(hintId);
    window.alert(hint.body);
    await this.poller?.kick();
  }

  private async promptFeedback(challengeId: string): Promise<void> {
    const answer = window.prompt('Nice one! How was this challenge? (1-5)');
    const rating = answer === null ? NaN : parseInt(answer, 10);
    if (rating >= 1 && rating <= 5) {
      await this.api.sendFeedback(challengeId, rating);
    }
  }

  private renderHeader(title: string, alias: string): void {
    this.root.innerHTML = `
      <header><h1>${title}</h1><span>playing as ${alias}</span></header>
      <div id="banner"></div>
      <div id="progress"></div>
      <div id="offers"></div>
      <div id="challenges"></div>
      <div id="scoreboard"></div>`;
  }

  private renderLoginScreen(): void {
    this.root.innerHTML = '<p>Session expired or invalid token. Please log in again.</p>';
  }

  private banner(text: string): void {
    this.section('banner').textContent = text;
  }

  private section(id: string): HTMLElement {
    return this.root.querySelector(`#${id}`)!;
  }
}
