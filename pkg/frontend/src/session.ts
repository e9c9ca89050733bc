import type { Profile, PromptEntry } from "./api.js";

/** Everything the shell knows about the signed-in user. Lives in memory
 * only; a page reload means logging in again, by design. */
export class Session {
  profile: Profile | null = null;
  promptQueue: PromptEntry[] = [];

  get active(): boolean {
    return this.profile !== null;
  }

  start(profile: Profile): void {
    this.profile = profile;
    this.promptQueue = [];
  }

  end(): void {
    this.profile = null;
    this.promptQueue = [];
  }

  /** Server-reported credited points; the UI shows this number verbatim. */
  setPoints(credited: number): void {
    if (this.profile) this.profile.creditedPoints = credited;
  }
}
