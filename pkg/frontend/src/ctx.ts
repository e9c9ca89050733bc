import type { ApiClient } from "./api.js";
import type { Session } from "./session.js";

/** What every view gets from the shell. */
export interface Ctx {
  api: ApiClient;
  session: Session;
  /** Refetch /me/reputation and repaint the points counter. */
  refreshPoints(): Promise<void>;
  /** Refetch /me/prompts and repaint the prompts button. */
  refreshPrompts(): Promise<void>;
}
